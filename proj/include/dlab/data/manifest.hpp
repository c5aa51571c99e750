// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include <json.hpp>

#include "dlab/data/dataset.hpp"
#include "dlab/data/synthetic.hpp"

namespace dlab {

/// Human-readable sidecar describing how a dataset was produced.
nlohmann::json synthetic_manifest(const SyntheticSpec& spec);
nlohmann::json dataset_summary(const Dataset& dataset);
nlohmann::json label_corruption_manifest(const LabelCorruption& corruption);

void write_json(const std::string& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::string& path);

}  // namespace dlab
