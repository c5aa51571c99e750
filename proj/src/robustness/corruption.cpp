// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/robustness/corruption.hpp"

#include <algorithm>
#include <cmath>

#include "dlab/errors.hpp"
#include "dlab/robustness/corruption_tables.hpp"

namespace dlab {

namespace {

namespace tables = corruption_tables;

struct ImageDims {
  std::size_t n, c, h, w;
};

ImageDims dims_of(const Tensor& x, const char* where) {
  if (x.rank() != 4) {
    throw ShapeError(std::string(where) + ": expected [N,C,H,W], got " + shape_str(x.shape()));
  }
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

void clip01(Tensor& x) {
  for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
}

// Half-sample symmetric extension: (d c b a | a b c d | d c b a).
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - 1 - i;
  return static_cast<std::size_t>(i);
}

// Applies `fn(r, g, b)` to each RGB pixel in place. Single-channel inputs
// are passed as r with g and b aliased to it.
template <typename Fn>
void for_each_rgb(Tensor& x, Fn fn) {
  const ImageDims d = dims_of(x, "rgb");
  const std::size_t plane = d.h * d.w;
  for (std::size_t i = 0; i < d.n; ++i) {
    double* img = x.ptr() + i * d.c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      if (d.c >= 3) {
        fn(img[p], img[plane + p], img[2 * plane + p]);
      } else {
        double g = img[p], b = img[p];
        fn(img[p], g, b);
      }
    }
  }
}

}  // namespace

std::string_view corruption_name(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::GaussianNoise: return "gaussian_noise";
    case CorruptionKind::ShotNoise: return "shot_noise";
    case CorruptionKind::ImpulseNoise: return "impulse_noise";
    case CorruptionKind::GaussianBlur: return "gaussian_blur";
    case CorruptionKind::Contrast: return "contrast";
    case CorruptionKind::Brightness: return "brightness";
    case CorruptionKind::Saturate: return "saturate";
    case CorruptionKind::Pixelate: return "pixelate";
  }
  return "unknown";
}

CorruptionKind parse_corruption(std::string_view name) {
  for (CorruptionKind k : kAllCorruptions) {
    if (corruption_name(k) == name) return k;
  }
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

void CorruptionSpec::validate() const {
  if (severity < 1 || severity > 5) {
    throw ConfigError("corruption severity " + std::to_string(severity) + " outside [1,5]");
  }
}

double CorruptionSpec::parameter() const {
  validate();
  const auto i = static_cast<std::size_t>(severity - 1);
  switch (kind) {
    case CorruptionKind::GaussianNoise: return tables::kGaussianNoiseStd[i];
    case CorruptionKind::ShotNoise: return tables::kShotNoiseScale[i];
    case CorruptionKind::ImpulseNoise: return tables::kImpulseAmount[i];
    case CorruptionKind::GaussianBlur: return tables::kBlurStd[i];
    case CorruptionKind::Contrast: return tables::kContrastFactor[i];
    case CorruptionKind::Brightness: return tables::kBrightnessOffset[i];
    case CorruptionKind::Saturate: return tables::kSaturateFactor[i];
    case CorruptionKind::Pixelate: return tables::kPixelateFactor[i];
  }
  throw ConfigError("unknown corruption kind");
}

Tensor gaussian_blur(const Tensor& x, double stddev) {
  const ImageDims d = dims_of(x, "gaussian_blur");
  if (!(stddev > 0.0)) throw ConfigError("gaussian_blur: stddev must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::max(1.0, std::ceil(3.0 * stddev)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (stddev * stddev));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    norm += v;
  }
  for (double& v : kernel) v /= norm;

  Tensor tmp(x.shape()), out(x.shape());
  for (std::size_t plane = 0; plane < d.n * d.c; ++plane) {
    const double* src = x.ptr() + plane * d.h * d.w;
    double* mid = tmp.ptr() + plane * d.h * d.w;
    double* dst = out.ptr() + plane * d.h * d.w;
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        double s = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          s += kernel[static_cast<std::size_t>(k + radius)] *
               src[y * d.w + reflect(static_cast<std::ptrdiff_t>(xx) + k, d.w)];
        }
        mid[y * d.w + xx] = s;
      }
    }
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        double s = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          s += kernel[static_cast<std::size_t>(k + radius)] *
               mid[reflect(static_cast<std::ptrdiff_t>(y) + k, d.h) * d.w + xx];
        }
        dst[y * d.w + xx] = s;
      }
    }
  }
  clip01(out);
  return out;
}

Tensor adjust_brightness(const Tensor& x, double offset) {
  Tensor out = x;
  // Raise the HSV value channel, keeping hue and saturation: scale RGB by
  // V'/V. Offset 0 is an exact identity.
  for_each_rgb(out, [offset](double& r, double& g, double& b) {
    const double v = std::max({r, g, b});
    const double v2 = std::min(1.0, v + offset);
    if (v > 0.0) {
      const double k = v2 / v;
      r *= k;
      g *= k;
      b *= k;
    } else {
      r = g = b = v2;
    }
  });
  clip01(out);
  return out;
}

Tensor adjust_contrast(const Tensor& x, double factor) {
  const ImageDims d = dims_of(x, "adjust_contrast");
  Tensor out = x;
  const std::size_t plane = d.h * d.w;
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    double* v = out.ptr() + p * plane;
    double mean = 0.0;
    for (std::size_t k = 0; k < plane; ++k) mean += v[k];
    mean /= static_cast<double>(plane);
    for (std::size_t k = 0; k < plane; ++k) v[k] = (v[k] - mean) * factor + mean;
  }
  clip01(out);
  return out;
}

Tensor adjust_saturation(const Tensor& x, double factor) {
  Tensor out = x;
  for_each_rgb(out, [factor](double& r, double& g, double& b) {
    const double v = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    if (v <= 0.0 || v == lo) return;
    const double s = (v - lo) / v;
    const double ratio = std::min(1.0, s * factor) / s;
    r = v - (v - r) * ratio;
    g = v - (v - g) * ratio;
    b = v - (v - b) * ratio;
  });
  clip01(out);
  return out;
}

Tensor pixelate(const Tensor& x, double factor) {
  const ImageDims d = dims_of(x, "pixelate");
  if (!(factor > 0.0 && factor <= 1.0)) throw ConfigError("pixelate: factor must lie in (0,1]");
  const auto lh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(d.h) * factor)));
  const auto lw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(d.w) * factor)));
  // Area-weighted downsampling: low-res cell (i, j) averages the source
  // region [i*h/lh, (i+1)*h/lh) x [j*w/lw, (j+1)*w/lw) by overlap.
  auto overlap = [](double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  };
  Tensor out(x.shape());
  std::vector<double> low(lh * lw);
  const double sy = static_cast<double>(d.h) / static_cast<double>(lh);
  const double sx = static_cast<double>(d.w) / static_cast<double>(lw);
  for (std::size_t p = 0; p < d.n * d.c; ++p) {
    const double* src = x.ptr() + p * d.h * d.w;
    for (std::size_t i = 0; i < lh; ++i) {
      for (std::size_t j = 0; j < lw; ++j) {
        const double y0 = static_cast<double>(i) * sy, y1 = y0 + sy;
        const double x0 = static_cast<double>(j) * sx, x1 = x0 + sx;
        double s = 0.0;
        for (std::size_t y = 0; y < d.h; ++y) {
          const double wy = overlap(y0, y1, static_cast<double>(y), static_cast<double>(y) + 1);
          if (wy == 0.0) continue;
          for (std::size_t xx = 0; xx < d.w; ++xx) {
            const double wx = overlap(x0, x1, static_cast<double>(xx), static_cast<double>(xx) + 1);
            s += wy * wx * src[y * d.w + xx];
          }
        }
        low[i * lw + j] = s / (sy * sx);
      }
    }
    double* dst = out.ptr() + p * d.h * d.w;
    for (std::size_t y = 0; y < d.h; ++y) {
      const std::size_t i = std::min(lh - 1, y * lh / d.h);
      for (std::size_t xx = 0; xx < d.w; ++xx) {
        dst[y * d.w + xx] = low[i * lw + std::min(lw - 1, xx * lw / d.w)];
      }
    }
  }
  clip01(out);
  return out;
}

Tensor impulse_noise(const Tensor& x, double amount, const Rng& rng) {
  const ImageDims d = dims_of(x, "impulse_noise");
  Tensor out = x;
  const std::size_t row = d.c * d.h * d.w;
  for (std::size_t i = 0; i < d.n; ++i) {
    Rng r = rng.fork(i);
    for (std::size_t k = i * row; k < (i + 1) * row; ++k) {
      const double u = r.uniform();
      if (u < amount) out[k] = u < 0.5 * amount ? 0.0 : 1.0;
    }
  }
  return out;
}

std::uint64_t sample_poisson(double mean, Rng& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("poisson: invalid mean");
  if (mean == 0.0) return 0;
  if (mean < 30.0) {
    // Knuth multiplication method.
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = rng.uniform();
    while (p > limit) {
      ++k;
      p *= rng.uniform();
    }
    return k;
  }
  // Transformed rejection with squeeze (Hormann's PTRS).
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::uint64_t>(k);
    }
  }
}

Tensor shot_noise(const Tensor& x, double scale, const Rng& rng) {
  const ImageDims d = dims_of(x, "shot_noise");
  if (!(scale > 0.0)) throw ConfigError("shot_noise: scale must be positive");
  Tensor out = x;
  const std::size_t row = d.c * d.h * d.w;
  for (std::size_t i = 0; i < d.n; ++i) {
    Rng r = rng.fork(i);
    for (std::size_t k = i * row; k < (i + 1) * row; ++k) {
      out[k] = static_cast<double>(sample_poisson(x[k] * scale, r)) / scale;
    }
  }
  clip01(out);
  return out;
}

Tensor apply_corruption(const Tensor& x, const CorruptionSpec& spec, const Rng& rng) {
  const ImageDims d = dims_of(x, "apply_corruption");
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("apply_corruption: input outside [0,1]");
  }
  const double p = spec.parameter();
  switch (spec.kind) {
    case CorruptionKind::GaussianNoise: {
      Tensor out = x;
      const std::size_t row = d.c * d.h * d.w;
      for (std::size_t i = 0; i < d.n; ++i) {
        Rng r = rng.fork(i);
        for (std::size_t k = i * row; k < (i + 1) * row; ++k) out[k] += p * r.normal();
      }
      clip01(out);
      return out;
    }
    case CorruptionKind::ShotNoise: return shot_noise(x, p, rng);
    case CorruptionKind::ImpulseNoise: return impulse_noise(x, p, rng);
    case CorruptionKind::GaussianBlur: return gaussian_blur(x, p);
    case CorruptionKind::Contrast: return adjust_contrast(x, p);
    case CorruptionKind::Brightness: return adjust_brightness(x, p);
    case CorruptionKind::Saturate: return adjust_saturation(x, p);
    case CorruptionKind::Pixelate: return pixelate(x, p);
  }
  throw ConfigError("unknown corruption kind");
}

double conditional_accuracy(std::span<const Label> clean_pred,
                            std::span<const Label> corrupted_pred,
                            std::span<const Label> labels) {
  if (clean_pred.size() != labels.size() || corrupted_pred.size() != labels.size()) {
    throw ShapeError("conditional_accuracy: prediction and label counts differ");
  }
  std::size_t clean_ok = 0, both_ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (clean_pred[i] != labels[i]) continue;
    ++clean_ok;
    both_ok += corrupted_pred[i] == labels[i];
  }
  if (clean_ok == 0) {
    throw UndefinedMetricError("conditional_accuracy: no clean sample classified correctly");
  }
  return static_cast<double>(both_ok) / static_cast<double>(clean_ok);
}

double conditional_accuracy(const Model& model, const Dataset& clean,
                            const Dataset& corrupted) {
  if (clean.size() != corrupted.size() || clean.labels() != corrupted.labels()) {
    throw ShapeError("conditional_accuracy: datasets are not index-aligned");
  }
  const auto clean_pred = argmax_rows(batched_logits(model, clean.images()));
  const auto corr_pred = argmax_rows(batched_logits(model, corrupted.images()));
  return conditional_accuracy(clean_pred, corr_pred, clean.labels());
}

CorruptionGrid corruption_grid(const Model& model, const Dataset& dataset,
                               std::span<const CorruptionKind> kinds,
                               std::span<const int> severities, const Rng& rng,
                               const CorruptionFn& corrupt, std::size_t threads) {
  if (kinds.empty() || severities.empty()) {
    throw ConfigError("corruption grid: kinds and severities must be non-empty");
  }
  if (dataset.size() == 0) throw UndefinedMetricError("corruption grid: empty dataset");
  const auto clean_pred = argmax_rows(batched_logits(model, dataset.images(), 256, threads));
  const std::span<const Label> labels = dataset.labels();

  CorruptionGrid grid;
  double total = 0.0;
  for (CorruptionKind kind : kinds) {
    for (int severity : severities) {
      const CorruptionSpec spec{kind, severity};
      spec.validate();
      const Rng cell_rng = rng.fork(static_cast<std::uint64_t>(kind) * 16 +
                                    static_cast<std::uint64_t>(severity));
      const Tensor corrupted = corrupt(dataset.images(), spec, cell_rng);
      const auto pred = argmax_rows(batched_logits(model, corrupted, 256, threads));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
      CorruptionCell cell{spec, static_cast<double>(hits) / static_cast<double>(labels.size()), 0.0};
      try {
        cell.conditional_accuracy = conditional_accuracy(clean_pred, pred, labels);
      } catch (const UndefinedMetricError&) {
        cell.conditional_accuracy = std::nan("");
      }
      total += cell.accuracy;
      grid.cells.push_back(cell);
    }
  }
  grid.mca = total / static_cast<double>(grid.cells.size());
  return grid;
}

double mca(const Model& model, const Dataset& dataset,
           std::span<const CorruptionKind> kinds, std::span<const int> severities,
           const Rng& rng, const CorruptionFn& corrupt) {
  return corruption_grid(model, dataset, kinds, severities, rng, corrupt).mca;
}

}  // namespace dlab
