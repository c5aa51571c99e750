// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dlab/autodiff/rng.hpp"
#include "dlab/errors.hpp"

namespace dlab {

namespace {

struct Latents {
  double angle_u, cx_u, cy_u, length_u;
  std::array<double, 3> bar_rgb, bg_rgb;
  double tex_amp_u, tex_dir_u, tex_freq_u, tex_phase_u;
  double dot_x_u, dot_y_u;
  std::array<double, 3> dot_rgb;
};

Latents draw_latents(Rng& rng) {
  Latents l{};
  l.angle_u = rng.uniform(-1.0, 1.0);
  l.cx_u = rng.uniform(-1.0, 1.0);
  l.cy_u = rng.uniform(-1.0, 1.0);
  l.length_u = rng.uniform();
  for (double& c : l.bar_rgb) c = rng.uniform();
  for (double& c : l.bg_rgb) c = rng.uniform();
  l.tex_amp_u = rng.uniform();
  l.tex_dir_u = rng.uniform();
  l.tex_freq_u = rng.uniform();
  l.tex_phase_u = rng.uniform();
  l.dot_x_u = rng.uniform();
  l.dot_y_u = rng.uniform();
  for (double& c : l.dot_rgb) c = rng.uniform();
  return l;
}

double segment_distance(double px, double py, double cx, double cy, double dx,
                        double dy, double half_len) {
  const double rx = px - cx, ry = py - cy;
  const double along = std::clamp(rx * dx + ry * dy, -half_len, half_len);
  const double ex = rx - along * dx, ey = ry - along * dy;
  return std::sqrt(ex * ex + ey * ey);
}

std::uint64_t split_key(Split s) { return s == Split::Train ? 0x7452 : 0x7453; }

}  // namespace

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic: need at least two classes");
  if (train_per_class == 0 || test_per_class == 0) {
    throw ConfigError("synthetic: per_class must be at least 1");
  }
  if (image_size < 4) throw ConfigError("synthetic: image_size must be >= 4");
  if (channels != 1 && channels != 3) throw ConfigError("synthetic: channels must be 1 or 3");
  if (!(ood_shift >= 0.0 && ood_shift <= 1.0)) throw ConfigError("synthetic: shift must lie in [0,1]");
  if (!(angle_jitter >= 0.0) || !(pixel_noise >= 0.0)) {
    throw ConfigError("synthetic: jitter and noise must be non-negative");
  }
}

Dataset render_synthetic(const SyntheticSpec& spec, Split latents, double shift) {
  spec.validate();
  if (!(shift >= 0.0 && shift <= 1.0)) throw ConfigError("synthetic: shift must lie in [0,1]");
  const Split stream_split = latents == Split::Train ? Split::Train : Split::Test;
  const std::size_t per_class =
      stream_split == Split::Train ? spec.train_per_class : spec.test_per_class;
  const std::size_t n = per_class * spec.num_classes;
  const std::size_t size = spec.image_size, chans = spec.channels;
  const double s = static_cast<double>(size);

  Tensor images({n, chans, size, size});
  std::vector<Label> labels(n);
  const Rng base = Rng(spec.seed, Stream::DataGen).fork(split_key(stream_split));

  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = static_cast<Label>(i % spec.num_classes);
    labels[i] = cls;
    Rng rng = base.fork(i);
    const Latents l = draw_latents(rng);

    const double theta = std::numbers::pi *
                         (static_cast<double>(cls) + spec.angle_jitter * l.angle_u) /
                         static_cast<double>(spec.num_classes);
    const double dx = std::cos(theta), dy = std::sin(theta);
    const double spread = 1.0 + shift;
    const double cx = s / 2.0 + l.cx_u * spread;
    const double cy = s / 2.0 + l.cy_u * spread;
    const double half_len = s * (0.28 + 0.16 * l.length_u);
    const double half_thick = 0.5 * (1.0 + shift);

    std::array<double, 3> bar{}, bg{}, dot{};
    for (int c = 0; c < 3; ++c) {
      // Shift rotates the palette towards the next channel and lifts the
      // background, lowering contrast.
      const int rc = (c + 1) % 3;
      bar[c] = 0.55 + 0.45 * ((1.0 - shift) * l.bar_rgb[c] + shift * l.bar_rgb[rc]);
      bg[c] = 0.05 + 0.35 * ((1.0 - shift) * l.bg_rgb[c] + shift * l.bg_rgb[rc]) +
              0.2 * shift;
      dot[c] = 0.3 + 0.7 * l.dot_rgb[c];
    }
    const double tex_amp = 0.06 * l.tex_amp_u * (1.0 + 3.0 * shift);
    const double tex_dir = std::numbers::pi * l.tex_dir_u;
    const double tex_freq = (1.0 + 2.0 * l.tex_freq_u) / s;
    const double tex_phase = 2.0 * std::numbers::pi * l.tex_phase_u;
    const double dot_x = 0.5 + (s - 1.0) * l.dot_x_u;
    const double dot_y = 0.5 + (s - 1.0) * l.dot_y_u;

    double* img = images.ptr() + i * chans * size * size;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double px = static_cast<double>(x) + 0.5;
        const double py = static_cast<double>(y) + 0.5;
        const double tex =
            tex_amp * std::sin(2.0 * std::numbers::pi * tex_freq *
                                   (px * std::cos(tex_dir) + py * std::sin(tex_dir)) +
                               tex_phase);
        const double d = segment_distance(px, py, cx, cy, dx, dy, half_len);
        const double bar_a = std::clamp(half_thick + 0.5 - d, 0.0, 1.0);
        const double dd = std::hypot(px - dot_x, py - dot_y);
        const double dot_a = std::clamp(1.2 - dd, 0.0, 1.0) * 0.8;
        for (std::size_t c = 0; c < chans; ++c) {
          const std::size_t cc = chans == 1 ? 0 : c;
          double v = bg[cc] + tex;
          v = (1.0 - dot_a) * v + dot_a * dot[cc];
          v = (1.0 - bar_a) * v + bar_a * bar[cc];
          img[(c * size + y) * size + x] = v;
        }
      }
    }
    for (std::size_t k = 0; k < chans * size * size; ++k) {
      img[k] = std::clamp(img[k] + spec.pixel_noise * rng.normal(), 0.0, 1.0);
    }
  }

  std::ostringstream prov;
  prov << "synthetic bars seed=" << spec.seed << " split=" << split_name(latents)
       << " shift=" << shift;
  return Dataset(std::move(images), std::move(labels), spec.num_classes, latents,
                 prov.str());
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  return SyntheticData{render_synthetic(spec, Split::Train, 0.0),
                       render_synthetic(spec, Split::Test, 0.0),
                       render_synthetic(spec, Split::Ood, spec.ood_shift)};
}

}  // namespace dlab
