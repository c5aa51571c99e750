// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlab/autodiff/losses.hpp"
#include "dlab/autodiff/tensor.hpp"
#include "dlab/models/model.hpp"

namespace dlab {

enum class Split { Train, Test, Ood };

std::string_view split_name(Split s);

/// Labelled images. Construction checks that images are [N,C,H,W] with every
/// pixel in [0,1], that there is one label per image, and that labels lie in
/// [0, num_classes). Immutable afterwards.
class Dataset {
 public:
  Dataset(Tensor images, std::vector<Label> labels, std::size_t num_classes,
          Split split, std::string provenance);

  const Tensor& images() const { return images_; }
  const std::vector<Label>& labels() const { return labels_; }
  std::size_t num_classes() const { return num_classes_; }
  Split split() const { return split_; }
  const std::string& provenance() const { return provenance_; }
  std::size_t size() const { return labels_.size(); }
  InputShape input_shape() const;
  const std::vector<std::size_t>& class_counts() const { return class_counts_; }

  /// Same images with replacement labels (checked).
  Dataset with_labels(std::vector<Label> labels, std::string provenance) const;
  /// Same labels with replacement images (checked).
  Dataset with_images(Tensor images, std::string provenance) const;
  /// The first `n` samples (or all, if fewer).
  Dataset head(std::size_t n) const;

 private:
  Tensor images_;
  std::vector<Label> labels_;
  std::size_t num_classes_;
  Split split_;
  std::string provenance_;
  std::vector<std::size_t> class_counts_;
};

/// Record of a label corruption applied once before training.
struct LabelCorruption {
  double rate = 0.0;
  std::uint64_t seed = 0;
  /// Corrupted positions, ascending.
  std::vector<std::size_t> indices;
  /// Labels before corruption, for every sample.
  std::vector<Label> original_labels;
};

struct CorruptedDataset {
  Dataset data;
  LabelCorruption corruption;
};

/// Replaces the labels of a uniformly random ceil(rate * N)-subset with a
/// class drawn uniformly from the other num_classes - 1 classes. The result
/// is frozen: the same (dataset, rate, seed) always yields the same labels.
CorruptedDataset corrupt_labels_fixed(const Dataset& dataset, double rate,
                                      std::uint64_t seed);

}  // namespace dlab
