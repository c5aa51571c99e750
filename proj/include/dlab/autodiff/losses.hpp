// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dlab/autodiff/tape.hpp"

namespace dlab {

using Label = std::int32_t;

/// Row-wise softmax(logits / tau) for logits[B,C], computed after
/// subtracting the row maximum. Throws ConfigError for tau <= 0 and
/// NumericError for non-finite logits.
Tensor softmax_temperature(const Tensor& logits, double tau);

/// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(Var logits, std::span<const Label> labels);

/// Per-sample cross-entropy without recording (used to rank attack
/// restarts).
std::vector<double> cross_entropy_per_sample(const Tensor& logits,
                                             std::span<const Label> labels);

/// Mean over the batch of sum_c p (log p - log q). `target` is a constant
/// distribution; `log_probs` holds log q. Terms with p == 0 contribute 0.
/// Both arguments must be row-stochastic within 1e-6.
Var kl_divergence(const Tensor& target, Var log_probs);

/// Row-wise argmax of logits[B,C]; ties resolve to the lowest index.
std::vector<Label> argmax_rows(const Tensor& logits);

}  // namespace dlab
