// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "dlab/autodiff/rng.hpp"
#include "dlab/data/dataset.hpp"
#include "dlab/models/model.hpp"

namespace dlab {

/// l-infinity PGD parameters on the [0,1] image scale.
struct AttackConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 0.03;
  std::size_t steps = 20;
  std::size_t restarts = 5;
  /// Start each restart from a uniform point in the eps-ball; false starts
  /// from x itself.
  bool random_start = true;

  void validate() const;
  bool operator==(const AttackConfig&) const = default;
};

/// x + N(0, sigma^2) per element, deliberately not clipped to [0,1].
Tensor gaussian_augment(const Tensor& x, double sigma, Rng& rng);

/// Projected gradient ascent on the cross-entropy, model evaluated with
/// dropout inactive. Each restart starts from clip(x + U(-eps, eps)) and
/// takes `steps` sign-gradient steps, each projected back onto the eps-ball
/// around x and onto [0,1]. Per sample, the returned point is a restart's
/// final iterate that is misclassified if any restart fooled the model,
/// otherwise the one with the highest loss. steps == 0 returns x unchanged.
///
/// Random starts for row i and restart r come from rng.fork(index_offset + i)
/// .fork(r), so results do not depend on how a dataset is batched.
Tensor pgd_attack(const Model& model, const Tensor& x, std::span<const Label> labels,
                  const AttackConfig& cfg, const Rng& rng, std::size_t index_offset = 0);

/// Fraction of samples still classified correctly after pgd_attack, i.e.
/// correct on every restart. Batches are spread over evaluation threads.
double evaluate_robustness(const Model& model, const Dataset& dataset,
                           const AttackConfig& cfg, const Rng& rng,
                           std::size_t threads = 0);

}  // namespace dlab
