// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/autodiff/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "dlab/errors.hpp"

namespace dlab {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_str(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " elements");
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape_));
  }
  return shape_[axis];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                     shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const char* where) const {
  if (!all_finite()) {
    throw NumericError(std::string("non-finite value in ") + where);
  }
}

bool Tensor::identical(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(),
                                       data_.size() * sizeof(double)) == 0);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shape " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

}  // namespace dlab
