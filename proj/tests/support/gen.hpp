// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Hand-rolled generators for property tests. They use std::mt19937_64 so
// that test inputs never share code with the library's own Rng.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dlab/autodiff/losses.hpp"
#include "dlab/autodiff/tensor.hpp"

namespace dlab::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(eng_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng_);
  }
  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(eng_);
  }

  Tensor tensor(Shape shape, double sd = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = normal(sd);
    return t;
  }
  Tensor uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = uniform(lo, hi);
    return t;
  }
  /// Normal entries kept at least `gap` away from zero, so ReLU kinks are
  /// out of reach of a finite-difference probe.
  Tensor away_from_zero(Shape shape, double gap) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) {
      do v = normal(); while (std::abs(v) < gap);
    }
    return t;
  }
  std::vector<Label> labels(std::size_t n, std::size_t classes) {
    std::vector<Label> out(n);
    for (Label& l : out) l = static_cast<Label>(index(classes));
    return out;
  }
  /// Row-stochastic [rows, cols] drawn from a flat Dirichlet, with an
  /// occasional exact zero so 0 * log 0 paths are exercised.
  Tensor simplex(std::size_t rows, std::size_t cols, bool allow_zeros = true) {
    Tensor t({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        double v = -std::log(1.0 - uniform());
        if (allow_zeros && uniform() < 0.1) v = 0.0;
        t[r * cols + c] = v;
        total += v;
      }
      if (total == 0.0) {
        t[r * cols] = total = 1.0;
      }
      for (std::size_t c = 0; c < cols; ++c) t[r * cols + c] /= total;
    }
    return t;
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace dlab::testing
