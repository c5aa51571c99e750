// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlab/distill/trainer.hpp"
#include "dlab/robustness/corruption.hpp"

namespace dlab {

struct PgdPoint {
  double epsilon = 0.0;
  std::size_t steps = 0;
  std::size_t restarts = 0;
  double accuracy = 0.0;
  bool operator==(const PgdPoint&) const = default;
};

struct KindConditional {
  std::string kind;
  /// Mean over severities; NaN if any cell was undefined.
  double conditional_accuracy = 0.0;
};

struct FinalMetrics {
  double test_accuracy = 0.0;
  /// NaN when there is no OOD split.
  double ood_accuracy = 0.0;
  std::vector<PgdPoint> pgd;
  double mca = 0.0;
  std::vector<CorruptionCell> corruption;
  std::vector<KindConditional> conditional;
};

/// One training or evaluation run. Everything except wall_clock_s is a pure
/// function of (config, seed).
struct RunRecord {
  std::string kind;  // teacher | distill | evaluate
  std::string config_hash;
  /// Resolved configuration (sweep value applied, single seed).
  std::string config;
  std::uint64_t seed = 0;
  std::string method;
  std::string sweep_param = "none";
  double sweep_value = 0.0;
  double sigma = 0.0;
  double mc_rate = 0.0;
  double teacher_dropout = 0.0;
  double label_corruption = 0.0;
  std::string checkpoint;
  std::string teacher;
  std::vector<EpochStats> epochs;
  FinalMetrics final;
  double wall_clock_s = 0.0;
};

nlohmann::json record_to_json(const RunRecord& r);
RunRecord record_from_json(const nlohmann::json& j);

/// File stem unique per (kind, method, sweep value, seed, config hash).
std::string run_id(const RunRecord& r);

/// Fixed column order shared by runs.csv and the report.
const std::vector<std::string>& run_csv_columns();
std::vector<std::string> run_csv_row(const RunRecord& r);
std::string csv_line(const std::vector<std::string>& cells);

/// Writes <out>/runs/<run_id>.json and appends a row to <out>/runs.csv.
void store_record(const std::string& out_dir, const RunRecord& r);
/// Appends rows to a CSV, writing the header first if the file is new.
void append_csv(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);
/// Every record under <dir>/runs, in unspecified order.
std::vector<RunRecord> load_records(const std::string& dir);

/// True when the metrics carried by two records are bit-identical
/// (wall-clock time excluded).
bool same_outcome(const RunRecord& a, const RunRecord& b);

}  // namespace dlab
