// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dlab/experiment/config.hpp"
#include "dlab/experiment/record.hpp"

namespace dlab {

using Progress = std::function<void(const std::string&)>;

struct LoadedData {
  Dataset train;
  Dataset test;
  std::optional<Dataset> ood;
  std::optional<LabelCorruption> corruption;
};

/// Synthetic or binary splits, with the fixed label corruption applied to
/// the train split when configured.
LoadedData load_data(const ExperimentConfig& config);

/// Test/OOD accuracy, PGD at config.attack, and the corruption grid over
/// config.eval kinds and severities. Attack and corruption randomness derive
/// from `seed`.
FinalMetrics final_metrics(const Model& model, const LoadedData& data,
                           const ExperimentConfig& config, std::uint64_t seed);

/// The config a single run executes: sweep value applied, seed list reduced
/// to `seed`, sweep cleared.
ExperimentConfig resolve_run(const ExperimentConfig& config, std::optional<double> sweep_value,
                             std::uint64_t seed);

/// Directory holding teachers trained with the given dropout rate.
std::string teacher_dir(const std::string& out_dir, double dropout);

struct TeacherOutcome {
  std::vector<RunRecord> records;
  /// Index into records of the best teacher per dropout rate, in sweep order.
  std::vector<std::size_t> best;
};

/// Trains a teacher per seed (and per teacher_dropout sweep value), saves
/// every checkpoint, and writes best.json naming the highest test accuracy
/// (earliest seed on ties).
TeacherOutcome cmd_train_teacher(const ExperimentConfig& config, const Progress& progress = {});

struct AggregateRow {
  std::string method;
  std::string sweep_param;
  double sweep_value = 0.0;
  double label_corruption = 0.0;
  std::size_t runs = 0;
  double test_mean = 0.0, test_std = 0.0;
  double ood_mean = 0.0, ood_std = 0.0;
  double pgd_mean = 0.0, pgd_std = 0.0;
  double mca_mean = 0.0, mca_std = 0.0;
};

/// Mean and sample standard deviation (n - 1; 0 for a single run) per
/// (method, sweep param, sweep value, label corruption), rows in first-seen
/// order.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);
const std::vector<std::string>& aggregate_csv_columns();
std::vector<std::string> aggregate_csv_row(const AggregateRow& row);

struct DistillOutcome {
  std::vector<RunRecord> records;
  std::vector<AggregateRow> aggregates;
};

/// Every sweep value x seed for config.distill.method. Records go to
/// <out>/runs, aggregates are appended to <out>/aggregates.csv.
DistillOutcome cmd_distill(const ExperimentConfig& config, const Progress& progress = {});

/// Both PGD grids, the corruption grid and OOD accuracy for one checkpoint,
/// using config.seeds.front() for attack and corruption randomness. Grid
/// CSVs go to <out>/eval.
RunRecord cmd_evaluate(const ExperimentConfig& config, const std::string& checkpoint,
                       const Progress& progress = {});

/// Reads <dir>/runs and writes <dir>/report/{summary.md, runs.csv,
/// aggregates.csv, robustness_vs_sigma.csv, accuracy_vs_r.csv, pgd_grid.csv,
/// corruption_grid.csv}. Rows are sorted by (method, sweep value, seed).
/// Throws DataError when no runs are found. Returns the written paths.
std::vector<std::string> cmd_report(const std::string& results_dir);

}  // namespace dlab
