// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "dlab/data/dataset.hpp"

namespace dlab {

/// Procedural oriented-bar task. Class k is a bar at angle pi * k / C (plus
/// jitter) drawn over a textured colour field with a clutter dot and pixel
/// noise. Colour, position, length, texture and clutter carry no class
/// information, so class evidence is spread over the image.
///
/// `shift` alters rendering statistics only (thicker bars, brighter and
/// hue-rotated palette, stronger texture, wider position spread); the latent
/// draws are shared, so shift 0 reproduces the unshifted split exactly.
struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  std::size_t image_size = 8;
  std::size_t channels = 3;
  double ood_shift = 0.5;
  /// Angle jitter as a fraction of the inter-class angle gap (each side).
  double angle_jitter = 0.45;
  double pixel_noise = 0.04;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  Dataset ood;
};

/// Train and test draw from disjoint random streams; the OOD split renders
/// the test latents with `spec.ood_shift`.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// One split rendered at an arbitrary shift. `latents` selects the train or
/// test latent stream (Ood is treated as Test).
Dataset render_synthetic(const SyntheticSpec& spec, Split latents, double shift);

}  // namespace dlab
