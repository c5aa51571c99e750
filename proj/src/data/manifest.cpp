// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/data/manifest.hpp"

#include <fstream>

#include "dlab/errors.hpp"

namespace dlab {

nlohmann::json synthetic_manifest(const SyntheticSpec& spec) {
  return {{"generator", "synthetic-bars"},
          {"num_classes", spec.num_classes},
          {"train_per_class", spec.train_per_class},
          {"test_per_class", spec.test_per_class},
          {"image_size", spec.image_size},
          {"channels", spec.channels},
          {"ood_shift", spec.ood_shift},
          {"angle_jitter", spec.angle_jitter},
          {"pixel_noise", spec.pixel_noise},
          {"seed", spec.seed}};
}

nlohmann::json dataset_summary(const Dataset& dataset) {
  const InputShape in = dataset.input_shape();
  return {{"split", std::string(split_name(dataset.split()))},
          {"size", dataset.size()},
          {"num_classes", dataset.num_classes()},
          {"input", {in.channels, in.height, in.width}},
          {"class_counts", dataset.class_counts()},
          {"provenance", dataset.provenance()}};
}

nlohmann::json label_corruption_manifest(const LabelCorruption& corruption) {
  return {{"rate", corruption.rate},
          {"seed", corruption.seed},
          {"corrupted", corruption.indices.size()},
          {"indices", corruption.indices}};
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace dlab
