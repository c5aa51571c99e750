// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlab/autodiff/rng.hpp"
#include "dlab/data/dataset.hpp"
#include "dlab/models/model.hpp"

namespace dlab {

enum class CorruptionKind {
  GaussianNoise,
  ShotNoise,
  ImpulseNoise,
  GaussianBlur,
  Contrast,
  Brightness,
  Saturate,
  Pixelate,
};

inline constexpr std::array<CorruptionKind, 8> kAllCorruptions{
    CorruptionKind::GaussianNoise, CorruptionKind::ShotNoise,
    CorruptionKind::ImpulseNoise,  CorruptionKind::GaussianBlur,
    CorruptionKind::Contrast,      CorruptionKind::Brightness,
    CorruptionKind::Saturate,      CorruptionKind::Pixelate};

std::string_view corruption_name(CorruptionKind kind);
/// Inverse of corruption_name; throws ConfigError for unknown names.
CorruptionKind parse_corruption(std::string_view name);

struct CorruptionSpec {
  CorruptionKind kind;
  int severity;  // 1..5

  void validate() const;
  /// The table parameter for this kind and severity.
  double parameter() const;
};

/// Corrupts every image of x[N,C,H,W] (pixels in [0,1]); output is clipped
/// to [0,1]. Image i draws its randomness from rng.fork(i), so the result is
/// a pure function of (x, spec, rng).
Tensor apply_corruption(const Tensor& x, const CorruptionSpec& spec, const Rng& rng);

// Parameterised primitives behind apply_corruption, exposed for testing.
Tensor gaussian_blur(const Tensor& x, double stddev);
Tensor adjust_brightness(const Tensor& x, double offset);
Tensor adjust_contrast(const Tensor& x, double factor);
Tensor adjust_saturation(const Tensor& x, double factor);
Tensor pixelate(const Tensor& x, double factor);
Tensor impulse_noise(const Tensor& x, double amount, const Rng& rng);
Tensor shot_noise(const Tensor& x, double scale, const Rng& rng);
std::uint64_t sample_poisson(double mean, Rng& rng);

using CorruptionFn =
    std::function<Tensor(const Tensor&, const CorruptionSpec&, const Rng&)>;

struct CorruptionCell {
  CorruptionSpec spec;
  double accuracy = 0.0;
  double conditional_accuracy = 0.0;
};

struct CorruptionGrid {
  std::vector<CorruptionCell> cells;  // kind-major, severity-minor
  double mca = 0.0;
};

/// Accuracy on every kind x severity cell. Cell (kind, severity) corrupts
/// with rng.fork(kind * 16 + severity). `corrupt` defaults to
/// apply_corruption. mca is the unweighted mean over cells.
CorruptionGrid corruption_grid(const Model& model, const Dataset& dataset,
                               std::span<const CorruptionKind> kinds,
                               std::span<const int> severities, const Rng& rng,
                               const CorruptionFn& corrupt = apply_corruption,
                               std::size_t threads = 0);

double mca(const Model& model, const Dataset& dataset,
           std::span<const CorruptionKind> kinds, std::span<const int> severities,
           const Rng& rng, const CorruptionFn& corrupt = apply_corruption);

/// |clean correct and corrupted correct| / |clean correct|. Throws
/// UndefinedMetricError when no clean sample is classified correctly.
double conditional_accuracy(std::span<const Label> clean_pred,
                            std::span<const Label> corrupted_pred,
                            std::span<const Label> labels);
double conditional_accuracy(const Model& model, const Dataset& clean,
                            const Dataset& corrupted);

}  // namespace dlab
