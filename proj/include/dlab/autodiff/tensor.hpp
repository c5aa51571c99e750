// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. The element count always equals the
/// product of the shape; construction with mismatched data throws ShapeError.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Scalar value of a one-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  /// Throws NumericError naming `where` if any element is NaN or Inf.
  void require_finite(const char* where) const;

  /// Bit-level equality of shape and every element.
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* where);

}  // namespace dlab
