// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/distill/losses.hpp"

#include "dlab/autodiff/ops.hpp"
#include "dlab/errors.hpp"

namespace dlab {

DistillLoss hinton_loss(Var student_logits, const Tensor& teacher_logits,
                        std::span<const Label> labels, double alpha, double tau) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("hinton_loss: alpha must lie in [0, 1]");
  if (!(tau > 0.0)) throw ConfigError("hinton_loss: tau must be positive");
  require_same_shape(student_logits.value(), teacher_logits, "hinton_loss logits");

  DistillLoss out;
  out.ce = cross_entropy(student_logits, labels);
  const Tensor soft_targets = softmax_temperature(teacher_logits, tau);
  out.kl = kl_divergence(soft_targets, log_softmax(student_logits, tau));
  out.total = add(scale(out.ce, 1.0 - alpha), scale(out.kl, alpha * tau * tau));
  return out;
}

DistillLoss sr_loss(Var student_logits_noisy, const Tensor& teacher_logits_clean,
                    std::span<const Label> labels, double alpha, double tau) {
  return hinton_loss(student_logits_noisy, teacher_logits_clean, labels, alpha, tau);
}

std::vector<Label> mc_corrupt_labels(std::span<const Label> labels, double r,
                                     std::size_t num_classes, Rng& rng) {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("mc_corrupt_labels: r must lie in [0, 1]");
  if (num_classes == 0) throw ConfigError("mc_corrupt_labels: num_classes must be positive");
  std::vector<Label> out(labels.begin(), labels.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0 || static_cast<std::size_t>(out[i]) >= num_classes) {
      throw ConfigError("mc_corrupt_labels: label out of range at index " + std::to_string(i));
    }
    if (rng.uniform() < r) out[i] = static_cast<Label>(rng.uniform_int(num_classes));
  }
  return out;
}

}  // namespace dlab
