// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlab/autodiff/rng.hpp"
#include "dlab/errors.hpp"

namespace dlab {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Ood: return "ood";
  }
  return "unknown";
}

Dataset::Dataset(Tensor images, std::vector<Label> labels, std::size_t num_classes,
                 Split split, std::string provenance)
    : images_(std::move(images)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      split_(split),
      provenance_(std::move(provenance)),
      class_counts_(num_classes, 0) {
  if (images_.rank() != 4) {
    throw ShapeError("dataset: images must be [N,C,H,W], got " + shape_str(images_.shape()));
  }
  if (images_.dim(0) != labels_.size()) {
    throw ShapeError("dataset: " + std::to_string(images_.dim(0)) + " images but " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (num_classes_ == 0) throw ConfigError("dataset: num_classes must be positive");
  for (double v : images_.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset: pixel outside [0,1]");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= num_classes_) {
      throw DataError("dataset: label " + std::to_string(labels_[i]) + " out of range", i);
    }
    ++class_counts_[static_cast<std::size_t>(labels_[i])];
  }
}

InputShape Dataset::input_shape() const {
  return InputShape{images_.dim(1), images_.dim(2), images_.dim(3)};
}

Dataset Dataset::with_labels(std::vector<Label> labels, std::string provenance) const {
  return Dataset(images_, std::move(labels), num_classes_, split_, std::move(provenance));
}

Dataset Dataset::with_images(Tensor images, std::string provenance) const {
  return Dataset(std::move(images), labels_, num_classes_, split_, std::move(provenance));
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  return Dataset(slice_rows(images_, 0, n),
                 std::vector<Label>(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n)),
                 num_classes_, split_, provenance_);
}

CorruptedDataset corrupt_labels_fixed(const Dataset& dataset, double rate,
                                      std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("corrupt_labels_fixed: rate must lie in [0, 1]");
  }
  const std::size_t n = dataset.size();
  const std::size_t classes = dataset.num_classes();
  // Guard against rate * n landing one ulp above an integer.
  const auto count = static_cast<std::size_t>(
      std::ceil(rate * static_cast<double>(n) - 1e-9));
  if (count > 0 && classes < 2) {
    throw ConfigError("corrupt_labels_fixed: need at least two classes");
  }

  Rng rng(seed, Stream::LabelCorruption);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  std::vector<Label> labels = dataset.labels();
  for (std::size_t idx : chosen) {
    const auto shift = 1 + rng.uniform_int(classes - 1);
    labels[idx] = static_cast<Label>((static_cast<std::size_t>(labels[idx]) + shift) % classes);
  }
  LabelCorruption record{rate, seed, std::move(chosen), dataset.labels()};
  Dataset data = dataset.with_labels(
      std::move(labels), dataset.provenance() + "; fixed label corruption rate=" +
                             std::to_string(rate) + " seed=" + std::to_string(seed));
  return CorruptedDataset{std::move(data), std::move(record)};
}

}  // namespace dlab
