// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/optim.hpp"

#include "dlab/errors.hpp"

namespace dlab {

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads,
                       std::span<Tensor> velocity, double lr, double momentum) {
  if (!(lr > 0.0)) throw ConfigError("sgd: learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("sgd: momentum must lie in [0, 1)");
  }
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd: parameter, gradient and velocity counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_same_shape(params[i], grads[i], "sgd gradient");
    require_same_shape(params[i], velocity[i], "sgd velocity");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].ptr();
    double* v = velocity[i].ptr();
    const double* g = grads[i].ptr();
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      v[j] = momentum * v[j] + g[j];
      p[j] -= lr * v[j];
    }
  }
}

}  // namespace dlab
