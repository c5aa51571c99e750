// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: train-teacher, distill, evaluate, report.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlab/errors.hpp"
#include "dlab/experiment/commands.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string method;
  std::optional<double> mc_rate;
  std::optional<double> sigma;
  std::optional<double> dropout;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Config file (flat key = value)");
  cmd->add_option("--seed", o.seed, "Single seed, replaces experiment.seeds");
  cmd->add_option("--seeds", o.seeds, "Comma-separated seeds")->delimiter(',');
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--method", o.method, "baseline, hinton, ft, sr or ga");
  cmd->add_option("--mc-rate", o.mc_rate, "Messy collaboration rate r");
  cmd->add_option("--sigma", o.sigma, "Input noise std for sr and ga");
  cmd->add_option("--dropout", o.dropout, "Teacher dropout rate");
}

dlab::ExperimentConfig build_config(const Overrides& o) {
  dlab::ExperimentConfig c =
      o.config_path.empty() ? dlab::ExperimentConfig{} : dlab::load_config(o.config_path);
  if (o.seed && !o.seeds.empty()) throw dlab::ConfigError("use --seed or --seeds, not both");
  if (o.seed) c.seeds = {*o.seed};
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.method.empty()) c.distill.method = dlab::parse_method(o.method);
  if (o.mc_rate) c.distill.mc_rate = *o.mc_rate;
  if (o.sigma) c.distill.sigma = *o.sigma;
  if (o.dropout) c.distill.teacher_dropout_rate = *o.dropout;
  c.validate();
  return c;
}

void progress(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distill-lab: noise-injection knowledge distillation experiments"};
  app.require_subcommand(1);
  Overrides o;
  std::string checkpoint, results_dir;

  CLI::App* teacher = app.add_subcommand("train-teacher", "Train teachers per seed and mark the best");
  CLI::App* distill = app.add_subcommand("distill", "Train students for a method, sweep and seed list");
  CLI::App* evaluate = app.add_subcommand("evaluate", "PGD grids, corruption grid and OOD for a checkpoint");
  CLI::App* report = app.add_subcommand("report", "Summarise a results directory");
  for (CLI::App* cmd : {teacher, distill, evaluate}) add_common(cmd, o);
  evaluate->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  report->add_option("--out,results_dir", results_dir, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*report) {
      for (const std::string& path : dlab::cmd_report(results_dir)) std::cout << path << '\n';
      return 0;
    }
    const dlab::ExperimentConfig config = build_config(o);
    if (*teacher) {
      const dlab::TeacherOutcome out = dlab::cmd_train_teacher(config, progress);
      for (std::size_t b : out.best) std::cout << "best teacher: " << out.records[b].checkpoint << '\n';
    } else if (*distill) {
      const dlab::DistillOutcome out = dlab::cmd_distill(config, progress);
      for (const dlab::AggregateRow& a : out.aggregates) {
        std::cout << dlab::csv_line(dlab::aggregate_csv_row(a));
      }
    } else if (*evaluate) {
      const dlab::RunRecord r = dlab::cmd_evaluate(config, checkpoint, progress);
      std::cout << "evaluation written: " << dlab::run_id(r) << '\n';
    }
    return 0;
  } catch (const dlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dlab::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
