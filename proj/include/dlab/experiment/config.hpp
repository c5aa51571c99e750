// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dlab/data/synthetic.hpp"
#include "dlab/distill/trainer.hpp"
#include "dlab/robustness/attack.hpp"
#include "dlab/robustness/corruption.hpp"

namespace dlab {

enum class DataSource { Synthetic, Binary };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  SyntheticSpec synthetic;
  std::string train_path;
  std::string test_path;
  std::string ood_path;
  /// Fixed pre-training label corruption of the train split.
  double label_corruption = 0.0;
  std::uint64_t label_corruption_seed = 1;

  bool operator==(const DataConfig&) const = default;
};

/// Grids used by `evaluate`.
struct EvalGrid {
  std::vector<std::size_t> steps{1, 5, 10, 15, 20, 100};
  double steps_epsilon = 8.0 / 255.0;
  /// In units of 1/255.
  std::vector<double> epsilons_255{1, 2, 10, 20, 25, 50, 100, 200};
  std::size_t epsilon_steps = 20;
  std::vector<CorruptionKind> corruptions{kAllCorruptions.begin(), kAllCorruptions.end()};
  std::vector<int> severities{1, 2, 3, 4, 5};

  bool operator==(const EvalGrid&) const = default;
};

/// Parameter varied by `distill` across sweep.values.
enum class SweepParam { None, Sigma, McRate, TeacherDropout, Alpha };

std::string_view sweep_param_name(SweepParam p);
SweepParam parse_sweep_param(std::string_view name);

struct ExperimentConfig {
  DistillConfig distill;
  AttackConfig attack;
  DataConfig data;
  EvalGrid eval;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string out_dir = "results";
  /// Explicit teacher for distill; empty means the best teacher recorded
  /// under out_dir for the configured teacher dropout rate.
  std::string teacher_checkpoint;
  SweepParam sweep = SweepParam::None;
  std::vector<double> sweep_values;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Flat `key = value` text. `#` starts a comment, lists are comma separated,
/// and unknown or repeated keys are rejected with the line number.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);
/// Every key, in a fixed order, with shortest round-trip numbers.
std::string serialize_config(const ExperimentConfig& config);

/// Locale-independent shortest decimal that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// FNV-1a over the canonical serialization of everything that determines a
/// run's outcome (seed list and output directory excluded), as 16 hex
/// digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace dlab
