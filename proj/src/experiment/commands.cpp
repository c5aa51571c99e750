// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/experiment/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <tuple>

#include "dlab/data/manifest.hpp"
#include "dlab/data/raw_images.hpp"
#include "dlab/errors.hpp"
#include "dlab/models/checkpoint.hpp"

namespace dlab {

namespace fs = std::filesystem;

namespace {

void say(const Progress& progress, const std::string& msg) {
  if (progress) progress(msg);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return {std::nan(""), std::nan("")};
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return out;
}

double first_pgd(const RunRecord& r) {
  return r.final.pgd.empty() ? std::nan("") : r.final.pgd.front().accuracy;
}

std::string percent(double v) {
  if (!std::isfinite(v)) return "n/a";
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, 100.0 * v, std::chars_format::fixed, 2);
  return std::string(buf, p);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::string out = csv_line(header);
  for (const auto& row : rows) out += csv_line(row);
  return out;
}

DistillConfig teacher_training_config(const ExperimentConfig& config, std::uint64_t seed) {
  DistillConfig c = config.distill;
  c.method = Method::Baseline;
  c.sigma = 0.0;
  c.mc_rate = 0.0;
  c.seed = seed;
  return c;
}

std::string resolve_teacher(const ExperimentConfig& run) {
  if (!run.teacher_checkpoint.empty()) return run.teacher_checkpoint;
  const fs::path marker =
      fs::path(teacher_dir(run.out_dir, run.distill.teacher_dropout_rate)) / "best.json";
  if (!fs::exists(marker)) {
    throw ConfigError("no teacher at " + marker.string() +
                      "; run train-teacher first or set distill.teacher_checkpoint");
  }
  return read_json(marker.string()).at("checkpoint").get<std::string>();
}

RunRecord base_record(const std::string& kind, const ExperimentConfig& run, std::uint64_t seed,
                      const ExperimentConfig& sweep_source, std::optional<double> sweep_value) {
  RunRecord r;
  r.kind = kind;
  r.config = serialize_config(run);
  r.config_hash = config_hash(run);
  r.seed = seed;
  r.method = std::string(method_name(run.distill.method));
  if (sweep_value) {
    r.sweep_param = std::string(sweep_param_name(sweep_source.sweep));
    r.sweep_value = *sweep_value;
  }
  r.sigma = run.distill.sigma;
  r.mc_rate = run.distill.mc_rate;
  r.teacher_dropout = run.distill.teacher_dropout_rate;
  r.label_corruption = run.data.label_corruption;
  return r;
}

std::vector<std::optional<double>> sweep_points(const ExperimentConfig& config) {
  std::vector<std::optional<double>> out;
  if (config.sweep == SweepParam::None) return {std::nullopt};
  for (double v : config.sweep_values) out.emplace_back(v);
  return out;
}

}  // namespace

LoadedData load_data(const ExperimentConfig& config) {
  std::optional<LoadedData> out;
  if (config.data.source == DataSource::Synthetic) {
    SyntheticData d = generate_synthetic(config.data.synthetic);
    out.emplace(LoadedData{std::move(d.train), std::move(d.test), std::move(d.ood), {}});
  } else {
    std::optional<Dataset> ood;
    if (!config.data.ood_path.empty()) ood = load_binary(config.data.ood_path, Split::Ood);
    out.emplace(LoadedData{load_binary(config.data.train_path, Split::Train),
                           load_binary(config.data.test_path, Split::Test), std::move(ood), {}});
  }
  if (config.data.label_corruption > 0.0) {
    CorruptedDataset c = corrupt_labels_fixed(out->train, config.data.label_corruption,
                                              config.data.label_corruption_seed);
    out->train = std::move(c.data);
    out->corruption = std::move(c.corruption);
  }
  return std::move(*out);
}

FinalMetrics final_metrics(const Model& model, const LoadedData& data,
                           const ExperimentConfig& config, std::uint64_t seed) {
  FinalMetrics m;
  m.test_accuracy = accuracy(model, data.test.images(), data.test.labels());
  m.ood_accuracy =
      data.ood ? accuracy(model, data.ood->images(), data.ood->labels()) : std::nan("");
  m.pgd.push_back({config.attack.epsilon, config.attack.steps, config.attack.restarts,
                   evaluate_robustness(model, data.test, config.attack, Rng(seed, Stream::PgdInit))});
  if (!config.eval.corruptions.empty() && !config.eval.severities.empty()) {
    CorruptionGrid grid = corruption_grid(model, data.test, config.eval.corruptions,
                                          config.eval.severities, Rng(seed, Stream::Corruption));
    m.mca = grid.mca;
    for (CorruptionKind kind : config.eval.corruptions) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const CorruptionCell& c : grid.cells) {
        if (c.spec.kind != kind) continue;
        sum += c.conditional_accuracy;
        ++count;
      }
      m.conditional.push_back({std::string(corruption_name(kind)), sum / static_cast<double>(count)});
    }
    m.corruption = std::move(grid.cells);
  } else {
    m.mca = std::nan("");
  }
  return m;
}

ExperimentConfig resolve_run(const ExperimentConfig& config, std::optional<double> sweep_value,
                             std::uint64_t seed) {
  ExperimentConfig run = config;
  if (sweep_value) {
    switch (config.sweep) {
      case SweepParam::Sigma: run.distill.sigma = *sweep_value; break;
      case SweepParam::McRate: run.distill.mc_rate = *sweep_value; break;
      case SweepParam::TeacherDropout: run.distill.teacher_dropout_rate = *sweep_value; break;
      case SweepParam::Alpha: run.distill.alpha = *sweep_value; break;
      case SweepParam::None: break;
    }
  }
  run.sweep = SweepParam::None;
  run.sweep_values.clear();
  run.seeds = {seed};
  run.distill.seed = seed;
  run.validate();
  return run;
}

std::string teacher_dir(const std::string& out_dir, double dropout) {
  return (fs::path(out_dir) / "teachers" / ("dropout-" + format_double(dropout))).string();
}

TeacherOutcome cmd_train_teacher(const ExperimentConfig& config, const Progress& progress) {
  config.validate();
  const LoadedData data = load_data(config);
  const InputShape input = data.train.input_shape();
  TeacherOutcome outcome;

  std::vector<std::optional<double>> points = {std::nullopt};
  if (config.sweep == SweepParam::TeacherDropout) points = sweep_points(config);
  for (const std::optional<double>& point : points) {
    const std::size_t first = outcome.records.size();
    std::string dir;
    for (std::uint64_t seed : config.seeds) {
      const ExperimentConfig run = resolve_run(config, point, seed);
      const double dropout = run.distill.teacher_dropout_rate;
      dir = teacher_dir(config.out_dir, dropout);
      fs::create_directories(dir);
      const auto t0 = std::chrono::steady_clock::now();

      Rng init_rng(seed, Stream::WeightInit);
      Model teacher =
          Model::init(ModelSpec::teacher(input, data.train.num_classes(), dropout), init_rng);
      TrainResult result = train(std::move(teacher), nullptr, data.train,
                                 teacher_training_config(run, seed), &data.test);

      RunRecord r = base_record("teacher", run, seed, config, point);
      r.method = "teacher";
      r.checkpoint = (fs::path(dir) / ("teacher-seed" + std::to_string(seed) + ".dlck")).string();
      save_checkpoint(r.checkpoint, result.model);
      r.epochs = std::move(result.epochs);
      r.final = final_metrics(result.model, data, run, seed);
      r.wall_clock_s = seconds_since(t0);
      store_record(config.out_dir, r);
      say(progress, "teacher dropout=" + format_double(dropout) + " seed=" +
                        std::to_string(seed) + " test=" + percent(r.final.test_accuracy) + "%");
      outcome.records.push_back(std::move(r));
    }
    std::size_t best = first;
    for (std::size_t i = first; i < outcome.records.size(); ++i) {
      if (outcome.records[i].final.test_accuracy > outcome.records[best].final.test_accuracy) best = i;
    }
    outcome.best.push_back(best);
    const RunRecord& b = outcome.records[best];
    write_json((fs::path(dir) / "best.json").string(),
               {{"seed", b.seed},
                {"checkpoint", b.checkpoint},
                {"test_accuracy", b.final.test_accuracy},
                {"config_hash", b.config_hash}});
  }
  return outcome;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
  using Key = std::tuple<std::string, std::string, double, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : records) {
    const Key key{r.method, r.sweep_param, r.sweep_value, r.label_corruption};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const Key& key : order) {
    const auto& rs = groups.at(key);
    std::vector<double> test, ood, pgd, mca;
    for (const RunRecord* r : rs) {
      test.push_back(r->final.test_accuracy);
      ood.push_back(r->final.ood_accuracy);
      pgd.push_back(first_pgd(*r));
      mca.push_back(r->final.mca);
    }
    AggregateRow row;
    std::tie(row.method, row.sweep_param, row.sweep_value, row.label_corruption) = key;
    row.runs = rs.size();
    const MeanStd t = mean_std(test), o = mean_std(ood), p = mean_std(pgd), m = mean_std(mca);
    row.test_mean = t.mean, row.test_std = t.std;
    row.ood_mean = o.mean, row.ood_std = o.std;
    row.pgd_mean = p.mean, row.pgd_std = p.std;
    row.mca_mean = m.mean, row.mca_std = m.std;
    out.push_back(row);
  }
  return out;
}

const std::vector<std::string>& aggregate_csv_columns() {
  static const std::vector<std::string> cols = {
      "method",   "sweep_param", "sweep_value", "label_corruption", "runs",
      "test_mean", "test_std",   "ood_mean",    "ood_std",          "pgd_mean",
      "pgd_std",  "mca_mean",    "mca_std"};
  return cols;
}

std::vector<std::string> aggregate_csv_row(const AggregateRow& a) {
  return {a.method,
          a.sweep_param,
          format_double(a.sweep_value),
          format_double(a.label_corruption),
          std::to_string(a.runs),
          format_double(a.test_mean),
          format_double(a.test_std),
          format_double(a.ood_mean),
          format_double(a.ood_std),
          format_double(a.pgd_mean),
          format_double(a.pgd_std),
          format_double(a.mca_mean),
          format_double(a.mca_std)};
}

DistillOutcome cmd_distill(const ExperimentConfig& config, const Progress& progress) {
  config.validate();
  const LoadedData data = load_data(config);
  const InputShape input = data.train.input_shape();
  DistillOutcome outcome;

  for (const std::optional<double>& point : sweep_points(config)) {
    for (std::uint64_t seed : config.seeds) {
      const ExperimentConfig run = resolve_run(config, point, seed);
      const auto t0 = std::chrono::steady_clock::now();

      std::optional<Model> teacher;
      std::string teacher_path;
      if (method_uses_teacher(run.distill.method)) {
        teacher_path = resolve_teacher(run);
        teacher = load_checkpoint(teacher_path);
      }
      Rng init_rng(seed, Stream::WeightInit);
      Model student = Model::init(ModelSpec::student(input, data.train.num_classes()), init_rng);
      TrainResult result = train(std::move(student), teacher ? &*teacher : nullptr, data.train,
                                 run.distill, &data.test);

      RunRecord r = base_record("distill", run, seed, config, point);
      r.teacher = teacher_path;
      r.epochs = std::move(result.epochs);
      r.final = final_metrics(result.model, data, run, seed);
      r.wall_clock_s = seconds_since(t0);
      const fs::path runs_dir = fs::path(config.out_dir) / "runs";
      fs::create_directories(runs_dir);
      r.checkpoint = (runs_dir / (run_id(r) + ".dlck")).string();
      save_checkpoint(r.checkpoint, result.model);
      store_record(config.out_dir, r);
      say(progress, r.method + (point ? " " + r.sweep_param + "=" + format_double(*point) : "") +
                        " seed=" + std::to_string(seed) +
                        " test=" + percent(r.final.test_accuracy) + "%");
      outcome.records.push_back(std::move(r));
    }
  }
  outcome.aggregates = aggregate(outcome.records);
  std::vector<std::vector<std::string>> rows;
  for (const AggregateRow& a : outcome.aggregates) rows.push_back(aggregate_csv_row(a));
  append_csv((fs::path(config.out_dir) / "aggregates.csv").string(), aggregate_csv_columns(), rows);
  return outcome;
}

RunRecord cmd_evaluate(const ExperimentConfig& config, const std::string& checkpoint,
                       const Progress& progress) {
  config.validate();
  const std::uint64_t seed = config.seeds.front();
  const ExperimentConfig run = resolve_run(config, std::nullopt, seed);
  const LoadedData data = load_data(run);
  const Model model = load_checkpoint(checkpoint);
  const auto t0 = std::chrono::steady_clock::now();

  RunRecord r = base_record("evaluate", run, seed, config, std::nullopt);
  r.method = fs::path(checkpoint).stem().string();
  r.checkpoint = checkpoint;
  r.final = final_metrics(model, data, run, seed);
  r.final.pgd.clear();

  const Rng pgd_rng(seed, Stream::PgdInit);
  for (std::size_t steps : run.eval.steps) {
    AttackConfig a = run.attack;
    a.epsilon = run.eval.steps_epsilon;
    a.steps = steps;
    r.final.pgd.push_back({a.epsilon, steps, a.restarts, evaluate_robustness(model, data.test, a, pgd_rng)});
    say(progress, "pgd steps=" + std::to_string(steps) + " acc=" + percent(r.final.pgd.back().accuracy) + "%");
  }
  for (double e255 : run.eval.epsilons_255) {
    AttackConfig a = run.attack;
    a.epsilon = e255 / 255.0;
    a.steps = run.eval.epsilon_steps;
    r.final.pgd.push_back({a.epsilon, a.steps, a.restarts, evaluate_robustness(model, data.test, a, pgd_rng)});
    say(progress, "pgd eps=" + format_double(e255) + "/255 acc=" + percent(r.final.pgd.back().accuracy) + "%");
  }
  r.wall_clock_s = seconds_since(t0);
  store_record(config.out_dir, r);

  const fs::path dir = fs::path(config.out_dir) / "eval";
  fs::create_directories(dir);
  const std::string stem = run_id(r);
  std::vector<std::vector<std::string>> steps_rows, eps_rows, cells;
  for (std::size_t i = 0; i < r.final.pgd.size(); ++i) {
    const PgdPoint& p = r.final.pgd[i];
    std::vector<std::string> row = {format_double(p.epsilon), format_double(p.epsilon * 255.0),
                                    std::to_string(p.steps), std::to_string(p.restarts),
                                    format_double(p.accuracy)};
    (i < run.eval.steps.size() ? steps_rows : eps_rows).push_back(std::move(row));
  }
  const std::vector<std::string> pgd_header = {"epsilon", "epsilon_255", "steps", "restarts", "accuracy"};
  write_text(dir / (stem + "-pgd_steps.csv"), csv_text(pgd_header, steps_rows));
  write_text(dir / (stem + "-pgd_epsilon.csv"), csv_text(pgd_header, eps_rows));
  for (const CorruptionCell& c : r.final.corruption) {
    cells.push_back({std::string(corruption_name(c.spec.kind)), std::to_string(c.spec.severity),
                     format_double(c.accuracy), format_double(c.conditional_accuracy)});
  }
  write_text(dir / (stem + "-corruption.csv"),
             csv_text({"kind", "severity", "accuracy", "conditional_accuracy"}, cells));
  return r;
}

std::vector<std::string> cmd_report(const std::string& results_dir) {
  std::vector<RunRecord> records = load_records(results_dir);
  if (records.empty()) throw DataError("no runs found in " + results_dir);
  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.method, a.sweep_value, a.seed, a.kind, a.sweep_param, a.label_corruption,
                    a.sigma, a.mc_rate, a.teacher_dropout, a.config_hash) <
           std::tie(b.method, b.sweep_value, b.seed, b.kind, b.sweep_param, b.label_corruption,
                    b.sigma, b.mc_rate, b.teacher_dropout, b.config_hash);
  });

  const fs::path dir = fs::path(results_dir) / "report";
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    written.push_back((dir / name).string());
  };

  std::vector<std::vector<std::string>> run_rows;
  for (const RunRecord& r : records) run_rows.push_back(run_csv_row(r));
  emit("runs.csv", csv_text(run_csv_columns(), run_rows));

  std::vector<RunRecord> trained;
  for (const RunRecord& r : records) {
    if (r.kind != "evaluate") trained.push_back(r);
  }
  const std::vector<AggregateRow> aggregates = aggregate(trained);
  std::vector<std::vector<std::string>> agg_rows;
  for (const AggregateRow& a : aggregates) agg_rows.push_back(aggregate_csv_row(a));
  emit("aggregates.csv", csv_text(aggregate_csv_columns(), agg_rows));

  // Fig. 2 analogue: robustness against input-noise level.
  {
    std::map<std::tuple<std::string, double>, std::vector<const RunRecord*>> groups;
    for (const RunRecord& r : records) {
      if (r.kind == "distill") groups[{r.method, r.sigma}].push_back(&r);
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, rs] : groups) {
      std::vector<double> test, pgd, mca;
      for (const RunRecord* r : rs) {
        test.push_back(r->final.test_accuracy);
        pgd.push_back(first_pgd(*r));
        mca.push_back(r->final.mca);
      }
      const MeanStd t = mean_std(test), p = mean_std(pgd), m = mean_std(mca);
      rows.push_back({std::get<0>(key), format_double(std::get<1>(key)), std::to_string(rs.size()),
                      format_double(t.mean), format_double(t.std), format_double(p.mean),
                      format_double(p.std), format_double(m.mean), format_double(m.std)});
    }
    emit("robustness_vs_sigma.csv",
         csv_text({"method", "sigma", "runs", "test_mean", "test_std", "pgd_mean", "pgd_std",
                   "mca_mean", "mca_std"},
                  rows));
  }
  // Fig. 4 analogue: accuracy against MC rate, per label-corruption level.
  {
    std::map<std::tuple<double, std::string, double>, std::vector<const RunRecord*>> groups;
    for (const RunRecord& r : trained) groups[{r.label_corruption, r.method, r.mc_rate}].push_back(&r);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, rs] : groups) {
      std::vector<double> test, ood;
      for (const RunRecord* r : rs) {
        test.push_back(r->final.test_accuracy);
        ood.push_back(r->final.ood_accuracy);
      }
      const MeanStd t = mean_std(test), o = mean_std(ood);
      rows.push_back({format_double(std::get<0>(key)), std::get<1>(key),
                      format_double(std::get<2>(key)), std::to_string(rs.size()),
                      format_double(t.mean), format_double(t.std), format_double(o.mean),
                      format_double(o.std)});
    }
    emit("accuracy_vs_r.csv",
         csv_text({"label_corruption", "method", "mc_rate", "runs", "test_mean", "test_std",
                   "ood_mean", "ood_std"},
                  rows));
  }
  {
    std::vector<std::vector<std::string>> pgd_rows, cell_rows;
    for (const RunRecord& r : records) {
      const std::string id = run_id(r);
      if (r.kind == "evaluate") {
        for (const PgdPoint& p : r.final.pgd) {
          pgd_rows.push_back({id, format_double(p.epsilon), format_double(p.epsilon * 255.0),
                              std::to_string(p.steps), std::to_string(p.restarts),
                              format_double(p.accuracy)});
        }
      }
      for (const CorruptionCell& c : r.final.corruption) {
        cell_rows.push_back({id, std::string(corruption_name(c.spec.kind)),
                             std::to_string(c.spec.severity), format_double(c.accuracy),
                             format_double(c.conditional_accuracy)});
      }
    }
    emit("pgd_grid.csv",
         csv_text({"run", "epsilon", "epsilon_255", "steps", "restarts", "accuracy"}, pgd_rows));
    emit("corruption_grid.csv",
         csv_text({"run", "kind", "severity", "accuracy", "conditional_accuracy"}, cell_rows));
  }

  std::string md = "# Results summary\n\n";
  md += std::to_string(records.size()) + " runs from `" + results_dir + "`.\n\n";
  md += "## Runs\n\n| kind | method | sweep | seed | test % | OOD % | PGD % | mCA % |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  for (const RunRecord& r : records) {
    const std::string sweep =
        r.sweep_param == "none" ? "-" : r.sweep_param + "=" + format_double(r.sweep_value);
    md += "| " + r.kind + " | " + r.method + " | " + sweep + " | " + std::to_string(r.seed) +
          " | " + percent(r.final.test_accuracy) + " | " + percent(r.final.ood_accuracy) + " | " +
          percent(first_pgd(r)) + " | " + percent(r.final.mca) + " |\n";
  }
  if (!aggregates.empty()) {
    md += "\n## Mean and std over seeds\n\n";
    md += "| method | sweep | label corruption | runs | test % | OOD % | PGD % | mCA % |\n";
    md += "|---|---|---|---|---|---|---|---|\n";
    for (const AggregateRow& a : aggregates) {
      const std::string sweep =
          a.sweep_param == "none" ? "-" : a.sweep_param + "=" + format_double(a.sweep_value);
      auto ms = [](double m, double s) { return percent(m) + " ± " + percent(s); };
      md += "| " + a.method + " | " + sweep + " | " + format_double(a.label_corruption) + " | " +
            std::to_string(a.runs) + " | " + ms(a.test_mean, a.test_std) + " | " +
            ms(a.ood_mean, a.ood_std) + " | " + ms(a.pgd_mean, a.pgd_std) + " | " +
            ms(a.mca_mean, a.mca_std) + " |\n";
    }
  }
  emit("summary.md", md);
  return written;
}

}  // namespace dlab
