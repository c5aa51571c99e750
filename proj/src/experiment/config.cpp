// Copyright 2026 The distill-lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlab/experiment/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "dlab/errors.hpp"

namespace dlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += fmt(xs[i]);
  }
  return out;
}

template <typename T, typename F>
std::vector<T> parse_list(std::string_view s, F parse) {
  std::vector<T> out;
  for (std::string_view item : split_list(s)) out.push_back(parse(item));
  return out;
}

std::string u64_str(std::uint64_t v) { return std::to_string(v); }

std::string_view data_source_name(DataSource s) {
  return s == DataSource::Binary ? "binary" : "synthetic";
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  /// Fields left out of the run hash.
  bool hashed = true;
};

#define DLAB_DOUBLE(KEY, MEMBER)                                               \
  Field {                                                                      \
    KEY, [](const ExperimentConfig& c) { return format_double(c.MEMBER); },    \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_double(v); } \
  }
#define DLAB_SIZE(KEY, MEMBER)                                                 \
  Field {                                                                      \
    KEY, [](const ExperimentConfig& c) { return u64_str(c.MEMBER); },          \
        [](ExperimentConfig& c, std::string_view v) { c.MEMBER = parse_u64(v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment.seeds",
       [](const ExperimentConfig& c) { return join(c.seeds, u64_str); },
       [](ExperimentConfig& c, std::string_view v) { c.seeds = parse_list<std::uint64_t>(v, parse_u64); },
       false},
      {"experiment.out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
       [](ExperimentConfig& c, std::string_view v) { c.out_dir = std::string(v); }, false},

      {"distill.method",
       [](const ExperimentConfig& c) { return std::string(method_name(c.distill.method)); },
       [](ExperimentConfig& c, std::string_view v) { c.distill.method = parse_method(v); }},
      DLAB_DOUBLE("distill.alpha", distill.alpha),
      DLAB_DOUBLE("distill.tau", distill.tau),
      DLAB_DOUBLE("distill.sigma", distill.sigma),
      DLAB_DOUBLE("distill.mc_rate", distill.mc_rate),
      DLAB_DOUBLE("distill.teacher_dropout", distill.teacher_dropout_rate),
      DLAB_SIZE("distill.batch_size", distill.batch_size),
      DLAB_DOUBLE("distill.momentum", distill.momentum),
      {"distill.ft_extended_schedule",
       [](const ExperimentConfig& c) { return std::string(c.distill.ft_extended_schedule ? "true" : "false"); },
       [](ExperimentConfig& c, std::string_view v) { c.distill.ft_extended_schedule = parse_bool(v); }},
      {"distill.teacher_checkpoint", [](const ExperimentConfig& c) { return c.teacher_checkpoint; },
       [](ExperimentConfig& c, std::string_view v) { c.teacher_checkpoint = std::string(v); }},

      DLAB_SIZE("schedule.epochs", distill.schedule.total_epochs),
      DLAB_DOUBLE("schedule.lr", distill.schedule.initial_lr),
      DLAB_DOUBLE("schedule.decay_factor", distill.schedule.decay_factor),
      {"schedule.decay_epochs",
       [](const ExperimentConfig& c) { return join(c.distill.schedule.decay_epochs, u64_str); },
       [](ExperimentConfig& c, std::string_view v) {
         c.distill.schedule.decay_epochs = parse_list<std::size_t>(v, parse_u64);
       }},

      DLAB_DOUBLE("attack.epsilon", attack.epsilon),
      DLAB_DOUBLE("attack.step_size", attack.step_size),
      DLAB_SIZE("attack.steps", attack.steps),
      DLAB_SIZE("attack.restarts", attack.restarts),
      {"attack.random_start",
       [](const ExperimentConfig& c) { return std::string(c.attack.random_start ? "true" : "false"); },
       [](ExperimentConfig& c, std::string_view v) { c.attack.random_start = parse_bool(v); }},

      {"data.source", [](const ExperimentConfig& c) { return std::string(data_source_name(c.data.source)); },
       [](ExperimentConfig& c, std::string_view v) {
         if (v == "synthetic") c.data.source = DataSource::Synthetic;
         else if (v == "binary") c.data.source = DataSource::Binary;
         else throw ConfigError("data.source must be synthetic or binary");
       }},
      DLAB_SIZE("data.num_classes", data.synthetic.num_classes),
      DLAB_SIZE("data.train_per_class", data.synthetic.train_per_class),
      DLAB_SIZE("data.test_per_class", data.synthetic.test_per_class),
      DLAB_SIZE("data.image_size", data.synthetic.image_size),
      DLAB_SIZE("data.channels", data.synthetic.channels),
      DLAB_DOUBLE("data.ood_shift", data.synthetic.ood_shift),
      DLAB_DOUBLE("data.angle_jitter", data.synthetic.angle_jitter),
      DLAB_DOUBLE("data.pixel_noise", data.synthetic.pixel_noise),
      DLAB_SIZE("data.seed", data.synthetic.seed),
      {"data.train_path", [](const ExperimentConfig& c) { return c.data.train_path; },
       [](ExperimentConfig& c, std::string_view v) { c.data.train_path = std::string(v); }},
      {"data.test_path", [](const ExperimentConfig& c) { return c.data.test_path; },
       [](ExperimentConfig& c, std::string_view v) { c.data.test_path = std::string(v); }},
      {"data.ood_path", [](const ExperimentConfig& c) { return c.data.ood_path; },
       [](ExperimentConfig& c, std::string_view v) { c.data.ood_path = std::string(v); }},
      DLAB_DOUBLE("data.label_corruption", data.label_corruption),
      DLAB_SIZE("data.label_corruption_seed", data.label_corruption_seed),

      {"sweep.param", [](const ExperimentConfig& c) { return std::string(sweep_param_name(c.sweep)); },
       [](ExperimentConfig& c, std::string_view v) { c.sweep = parse_sweep_param(v); }},
      {"sweep.values", [](const ExperimentConfig& c) { return join(c.sweep_values, format_double); },
       [](ExperimentConfig& c, std::string_view v) { c.sweep_values = parse_list<double>(v, parse_double); }},

      {"evaluate.steps", [](const ExperimentConfig& c) { return join(c.eval.steps, u64_str); },
       [](ExperimentConfig& c, std::string_view v) { c.eval.steps = parse_list<std::size_t>(v, parse_u64); }},
      DLAB_DOUBLE("evaluate.steps_epsilon", eval.steps_epsilon),
      {"evaluate.epsilons_255", [](const ExperimentConfig& c) { return join(c.eval.epsilons_255, format_double); },
       [](ExperimentConfig& c, std::string_view v) { c.eval.epsilons_255 = parse_list<double>(v, parse_double); }},
      DLAB_SIZE("evaluate.epsilon_steps", eval.epsilon_steps),
      {"evaluate.corruptions",
       [](const ExperimentConfig& c) {
         return join(c.eval.corruptions, [](CorruptionKind k) { return std::string(corruption_name(k)); });
       },
       [](ExperimentConfig& c, std::string_view v) {
         c.eval.corruptions = parse_list<CorruptionKind>(v, parse_corruption);
       }},
      {"evaluate.severities",
       [](const ExperimentConfig& c) {
         return join(c.eval.severities, [](int s) { return std::to_string(s); });
       },
       [](ExperimentConfig& c, std::string_view v) {
         c.eval.severities =
             parse_list<int>(v, [](std::string_view s) { return static_cast<int>(parse_u64(s)); });
       }},
  };
  return table;
}

#undef DLAB_DOUBLE
#undef DLAB_SIZE

}  // namespace

std::string_view sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::None: return "none";
    case SweepParam::Sigma: return "sigma";
    case SweepParam::McRate: return "mc_rate";
    case SweepParam::TeacherDropout: return "teacher_dropout";
    case SweepParam::Alpha: return "alpha";
  }
  return "none";
}

SweepParam parse_sweep_param(std::string_view name) {
  for (SweepParam p : {SweepParam::None, SweepParam::Sigma, SweepParam::McRate,
                       SweepParam::TeacherDropout, SweepParam::Alpha}) {
    if (sweep_param_name(p) == name) return p;
  }
  throw ConfigError("unknown sweep.param '" + std::string(name) + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s) {
  s = trim(s);
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

void ExperimentConfig::validate() const {
  distill.validate();
  attack.validate();
  if (data.source == DataSource::Synthetic) {
    data.synthetic.validate();
  } else if (data.train_path.empty() || data.test_path.empty()) {
    throw ConfigError("binary data needs data.train_path and data.test_path");
  }
  if (!(data.label_corruption >= 0.0 && data.label_corruption <= 1.0)) {
    throw ConfigError("data.label_corruption must lie in [0, 1]");
  }
  if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("experiment.seeds contains duplicates");
  }
  if (out_dir.empty()) throw ConfigError("experiment.out_dir must not be empty");
  if ((sweep == SweepParam::None) != sweep_values.empty()) {
    throw ConfigError("sweep.param and sweep.values must be set together");
  }
  for (int s : eval.severities) CorruptionSpec{CorruptionKind::GaussianNoise, s}.validate();
  for (double e : eval.epsilons_255) {
    if (!(e >= 0.0)) throw ConfigError("evaluate.epsilons_255 must be non-negative");
  }
  if (!(eval.steps_epsilon >= 0.0)) throw ConfigError("evaluate.steps_epsilon must be non-negative");
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "config line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (!field) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + ": repeated key '" + std::string(key) + "'");
    }
    try {
      field->set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + " (" + std::string(key) + "): " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const Field& f : fields()) {
    if (!f.hashed) continue;
    feed(f.key);
    feed("=");
    feed(f.get(config));
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dlab
