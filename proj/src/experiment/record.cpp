// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/experiment/record.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dlab/data/manifest.hpp"
#include "dlab/errors.hpp"
#include "dlab/experiment/config.hpp"

namespace dlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON has no NaN; store non-finite values as their text form.
json num(double v) { return std::isfinite(v) ? json(v) : json(format_double(v)); }

double get_num(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

json record_to_json(const RunRecord& r) {
  json epochs = json::array();
  for (const EpochStats& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"lr", num(e.lr)},
                      {"train_loss", num(e.train_loss)},
                      {"train_ce", num(e.train_ce)},
                      {"train_kl", num(e.train_kl)},
                      {"test_accuracy", num(e.test_accuracy)}});
  }
  json pgd = json::array();
  for (const PgdPoint& p : r.final.pgd) {
    pgd.push_back({{"epsilon", num(p.epsilon)},
                   {"steps", p.steps},
                   {"restarts", p.restarts},
                   {"accuracy", num(p.accuracy)}});
  }
  json cells = json::array();
  for (const CorruptionCell& c : r.final.corruption) {
    cells.push_back({{"kind", std::string(corruption_name(c.spec.kind))},
                     {"severity", c.spec.severity},
                     {"accuracy", num(c.accuracy)},
                     {"conditional_accuracy", num(c.conditional_accuracy)}});
  }
  json cond = json::array();
  for (const KindConditional& k : r.final.conditional) {
    cond.push_back({{"kind", k.kind}, {"conditional_accuracy", num(k.conditional_accuracy)}});
  }
  return {{"kind", r.kind},
          {"config_hash", r.config_hash},
          {"config", r.config},
          {"seed", r.seed},
          {"method", r.method},
          {"sweep_param", r.sweep_param},
          {"sweep_value", num(r.sweep_value)},
          {"sigma", num(r.sigma)},
          {"mc_rate", num(r.mc_rate)},
          {"teacher_dropout", num(r.teacher_dropout)},
          {"label_corruption", num(r.label_corruption)},
          {"checkpoint", r.checkpoint},
          {"teacher", r.teacher},
          {"epochs", epochs},
          {"final",
           {{"test_accuracy", num(r.final.test_accuracy)},
            {"ood_accuracy", num(r.final.ood_accuracy)},
            {"pgd", pgd},
            {"mca", num(r.final.mca)},
            {"corruption", cells},
            {"conditional", cond}}},
          {"wall_clock_s", num(r.wall_clock_s)}};
}

RunRecord record_from_json(const json& j) {
  try {
    RunRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    r.sweep_param = j.at("sweep_param").get<std::string>();
    r.sweep_value = get_num(j.at("sweep_value"));
    r.sigma = get_num(j.at("sigma"));
    r.mc_rate = get_num(j.at("mc_rate"));
    r.teacher_dropout = get_num(j.at("teacher_dropout"));
    r.label_corruption = get_num(j.at("label_corruption"));
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.teacher = j.at("teacher").get<std::string>();
    for (const json& e : j.at("epochs")) {
      r.epochs.push_back({e.at("epoch").get<std::size_t>(), get_num(e.at("lr")),
                          get_num(e.at("train_loss")), get_num(e.at("train_ce")),
                          get_num(e.at("train_kl")), get_num(e.at("test_accuracy"))});
    }
    const json& f = j.at("final");
    r.final.test_accuracy = get_num(f.at("test_accuracy"));
    r.final.ood_accuracy = get_num(f.at("ood_accuracy"));
    for (const json& p : f.at("pgd")) {
      r.final.pgd.push_back({get_num(p.at("epsilon")), p.at("steps").get<std::size_t>(),
                             p.at("restarts").get<std::size_t>(), get_num(p.at("accuracy"))});
    }
    r.final.mca = get_num(f.at("mca"));
    for (const json& c : f.at("corruption")) {
      r.final.corruption.push_back(
          {{parse_corruption(c.at("kind").get<std::string>()), c.at("severity").get<int>()},
           get_num(c.at("accuracy")),
           get_num(c.at("conditional_accuracy"))});
    }
    for (const json& k : f.at("conditional")) {
      r.final.conditional.push_back(
          {k.at("kind").get<std::string>(), get_num(k.at("conditional_accuracy"))});
    }
    r.wall_clock_s = get_num(j.at("wall_clock_s"));
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
}

std::string run_id(const RunRecord& r) {
  std::string id = r.kind + "-" + r.method;
  if (r.sweep_param != "none") id += "-" + r.sweep_param + "_" + format_double(r.sweep_value);
  return id + "-seed" + std::to_string(r.seed) + "-" + r.config_hash;
}

const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> cols = {
      "kind",    "method",          "sweep_param",      "sweep_value",
      "seed",    "sigma",           "mc_rate",          "teacher_dropout",
      "label_corruption", "test_accuracy", "ood_accuracy", "pgd_epsilon",
      "pgd_steps", "pgd_accuracy",  "mca",              "config_hash"};
  return cols;
}

std::vector<std::string> run_csv_row(const RunRecord& r) {
  const PgdPoint pgd = r.final.pgd.empty() ? PgdPoint{std::nan(""), 0, 0, std::nan("")}
                                           : r.final.pgd.front();
  return {r.kind,
          r.method,
          r.sweep_param,
          format_double(r.sweep_value),
          std::to_string(r.seed),
          format_double(r.sigma),
          format_double(r.mc_rate),
          format_double(r.teacher_dropout),
          format_double(r.label_corruption),
          format_double(r.final.test_accuracy),
          format_double(r.final.ood_accuracy),
          format_double(pgd.epsilon),
          std::to_string(pgd.steps),
          format_double(pgd.accuracy),
          format_double(r.final.mca),
          r.config_hash};
}

std::string csv_line(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    const std::string& c = cells[i];
    if (c.find_first_of(",\"\n") == std::string::npos) {
      out += c;
      continue;
    }
    out += '"';
    for (char ch : c) {
      if (ch == '"') out += '"';
      out += ch;
    }
    out += '"';
  }
  return out + '\n';
}

void append_csv(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw DataError("cannot append to " + path);
  if (fresh) out << csv_line(header);
  for (const auto& row : rows) out << csv_line(row);
}

void store_record(const std::string& out_dir, const RunRecord& r) {
  const fs::path runs = fs::path(out_dir) / "runs";
  fs::create_directories(runs);
  write_json((runs / (run_id(r) + ".json")).string(), record_to_json(r));
  append_csv((fs::path(out_dir) / "runs.csv").string(), run_csv_columns(), {run_csv_row(r)});
}

std::vector<RunRecord> load_records(const std::string& dir) {
  std::vector<RunRecord> out;
  const fs::path runs = fs::path(dir) / "runs";
  if (!fs::is_directory(runs)) return out;
  for (const auto& entry : fs::directory_iterator(runs)) {
    if (entry.path().extension() != ".json") continue;
    out.push_back(record_from_json(read_json(entry.path().string())));
  }
  return out;
}

bool same_outcome(const RunRecord& a, const RunRecord& b) {
  if (a.kind != b.kind || a.config_hash != b.config_hash || a.seed != b.seed ||
      a.epochs.size() != b.epochs.size() || a.final.pgd.size() != b.final.pgd.size() ||
      a.final.corruption.size() != b.final.corruption.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    const EpochStats &x = a.epochs[i], &y = b.epochs[i];
    if (!same_bits(x.train_loss, y.train_loss) || !same_bits(x.train_ce, y.train_ce) ||
        !same_bits(x.train_kl, y.train_kl) || !same_bits(x.test_accuracy, y.test_accuracy)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.final.pgd.size(); ++i) {
    if (!same_bits(a.final.pgd[i].accuracy, b.final.pgd[i].accuracy)) return false;
  }
  for (std::size_t i = 0; i < a.final.corruption.size(); ++i) {
    if (!same_bits(a.final.corruption[i].accuracy, b.final.corruption[i].accuracy) ||
        !same_bits(a.final.corruption[i].conditional_accuracy,
                   b.final.corruption[i].conditional_accuracy)) {
      return false;
    }
  }
  return same_bits(a.final.test_accuracy, b.final.test_accuracy) &&
         same_bits(a.final.ood_accuracy, b.final.ood_accuracy) &&
         same_bits(a.final.mca, b.final.mca);
}

}  // namespace dlab
