// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Severity -> parameter tables for the procedural corruption suite. Index i
// holds severity i + 1. Each table is strictly monotone in the direction
// that makes the corruption stronger. docs/corruption_tables.md mirrors
// these values and a unit test keeps the two in sync.

#pragma once

#include <array>

namespace dlab::corruption_tables {

/// Additive N(0, s^2) noise std.
inline constexpr std::array<double, 5> kGaussianNoiseStd{0.04, 0.06, 0.08, 0.09, 0.10};
/// Poisson photon count scale: x -> Poisson(x * k) / k. Smaller is noisier.
inline constexpr std::array<double, 5> kShotNoiseScale{500.0, 250.0, 100.0, 75.0, 50.0};
/// Per-element probability of salt-or-pepper replacement.
inline constexpr std::array<double, 5> kImpulseAmount{0.01, 0.02, 0.03, 0.05, 0.07};
/// Gaussian blur kernel std in pixels.
inline constexpr std::array<double, 5> kBlurStd{0.4, 0.6, 0.7, 0.8, 1.0};
/// Per-channel contrast factor around the channel mean. Smaller is stronger.
inline constexpr std::array<double, 5> kContrastFactor{0.75, 0.5, 0.4, 0.3, 0.15};
/// Offset added to the HSV value channel.
inline constexpr std::array<double, 5> kBrightnessOffset{0.05, 0.1, 0.15, 0.2, 0.3};
/// Multiplier on HSV saturation.
inline constexpr std::array<double, 5> kSaturateFactor{1.5, 2.0, 3.0, 4.0, 6.0};
/// Side length of the downsampled image relative to the original.
inline constexpr std::array<double, 5> kPixelateFactor{0.9, 0.75, 0.6, 0.5, 0.4};

}  // namespace dlab::corruption_tables
