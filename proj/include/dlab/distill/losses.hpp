// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "dlab/autodiff/losses.hpp"
#include "dlab/autodiff/rng.hpp"

namespace dlab {

/// Both components of a distillation objective, kept apart so each can be
/// logged. `kl` is the raw divergence, before the alpha * tau^2 factor.
struct DistillLoss {
  Var total;
  Var ce;
  Var kl;
};

/// (1 - alpha) * CE(student, labels) + alpha * tau^2 * KL(T^tau || S^tau),
/// with the temperature-softened teacher distribution as the target.
/// Teacher logits are constants: no gradient reaches them.
DistillLoss hinton_loss(Var student_logits, const Tensor& teacher_logits,
                        std::span<const Label> labels, double alpha, double tau);

/// Soft randomization objective. The arithmetic is exactly hinton_loss; what
/// differs is that the caller evaluates the student on x + delta and the
/// teacher on the clean x.
DistillLoss sr_loss(Var student_logits_noisy, const Tensor& teacher_logits_clean,
                    std::span<const Label> labels, double alpha, double tau);

/// Per-batch target variability: each label is independently, with
/// probability r, replaced by a class drawn uniformly from all C classes
/// (possibly the original). Advances `rng` on every call.
std::vector<Label> mc_corrupt_labels(std::span<const Label> labels, double r,
                                     std::size_t num_classes, Rng& rng);

}  // namespace dlab
