// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlab {

/// Tensor shapes that do not fit together.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf reached a place where only finite values are valid.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or out-of-domain hyperparameter.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed dataset or checkpoint file. `record()` is the offending record
/// index when the failure is tied to one, otherwise npos.
class DataError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit DataError(const std::string& what, std::size_t record = npos)
      : std::runtime_error(what), record_(record) {}

  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

/// A metric whose denominator is empty (e.g. no clean-correct samples).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dlab
