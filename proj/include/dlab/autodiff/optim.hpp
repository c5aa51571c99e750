// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "dlab/autodiff/tensor.hpp"

namespace dlab {

/// Heavy-ball SGD without dampening or weight decay:
///   v <- momentum * v + g
///   p <- p - lr * v
/// Requires lr > 0 and 0 <= momentum < 1; all three spans must agree
/// element-wise in shape.
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads,
                       std::span<Tensor> velocity, double lr, double momentum);

}  // namespace dlab
