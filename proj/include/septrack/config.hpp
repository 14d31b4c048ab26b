// Copyright 2026 The septrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file config.hpp
/// Experiment configuration files.
///
/// Grammar (one item per line, '#' starts a comment line):
///
///     [section]
///     key = value
///
/// Sections and keys are fixed; unknown ones are errors. Lists are comma
/// separated. format_config() emits every field, and parsing its output
/// gives back an equal configuration.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "septrack/io.hpp"
#include "septrack/loss.hpp"
#include "septrack/sampler.hpp"

namespace septrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { SingleRun, ScalingSweep, BoundProbe, Fig2, Fig4 };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SingleRun: return "single";
    case ExperimentKind::ScalingSweep: return "sweep";
    case ExperimentKind::BoundProbe: return "probe";
    case ExperimentKind::Fig2: return "fig2";
    case ExperimentKind::Fig4: return "fig4";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "single" || s == "run") return ExperimentKind::SingleRun;
  if (s == "sweep") return ExperimentKind::ScalingSweep;
  if (s == "probe") return ExperimentKind::BoundProbe;
  if (s == "fig2") return ExperimentKind::Fig2;
  if (s == "fig4") return ExperimentKind::Fig4;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

/// eta = value, or eta = fraction * (learning-rate bound for the mode and B).
struct EtaPolicy {
  enum class Kind { Explicit, FractionOfBound };
  Kind kind = Kind::FractionOfBound;
  double value = 0.5;

  bool operator==(const EtaPolicy&) const = default;
};

inline std::string format_eta_policy(const EtaPolicy& p) {
  return std::string(p.kind == EtaPolicy::Kind::Explicit ? "explicit:"
                                                         : "bound:") +
         format_double(p.value);
}

inline EtaPolicy parse_eta_policy(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("eta must be explicit:<value> or bound:<fraction>");
  const auto head = trim(s.substr(0, colon));
  EtaPolicy p;
  if (!parse_double(s.substr(colon + 1), p.value) || !std::isfinite(p.value))
    throw ConfigError("eta: bad number");
  if (head == "explicit") {
    p.kind = EtaPolicy::Kind::Explicit;
    if (!(p.value > 0.0)) throw ConfigError("eta: explicit value must be > 0");
  } else if (head == "bound") {
    p.kind = EtaPolicy::Kind::FractionOfBound;
    if (!(p.value > 0.0 && p.value <= 1.0))
      throw ConfigError("eta: bound fraction must lie in (0, 1]");
  } else {
    throw ConfigError("eta: unknown policy '" + std::string(head) + "'");
  }
  return p;
}

struct DatasetSpec {
  std::string source = "synthesize";  // synthesize | file
  std::string path;                   // for source = file
  std::size_t d = 2;
  std::size_t n = 512;
  double gamma = 1.0;
  double gap = 0.5;
  std::uint64_t seed = 1;
  std::size_t holdout = 0;  // validation points, 0 for none
  std::optional<std::uint64_t> holdout_seed;

  std::uint64_t effective_holdout_seed() const {
    return holdout_seed ? *holdout_seed : seed + 1;
  }
  bool operator==(const DatasetSpec&) const = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SingleRun;
  std::string name = "experiment";
  DatasetSpec dataset;
  LossKind loss = LossKind::Logistic;
  SamplingMode mode = SamplingMode::WithReplacement;
  EtaPolicy eta;
  std::vector<std::size_t> batch_sizes{1};
  std::uint64_t iterations = 0;  // T; exactly one of iterations/epochs is set
  std::uint64_t epochs = 0;
  std::uint64_t seed = 1;  // sampler seed
  std::string w0 = "zeros";  // zeros | normal | comma-separated values
  std::string order_file;
  double snapshot_ratio = 1.1;
  bool control = true;   // sweep: also run fixed eta at the B = 1 value
  double burn_in = 0.2;  // sweep: fraction of epochs discarded
  std::vector<double> fractions{0.5, 0.99};
  std::vector<std::size_t> dims{5, 10};
  std::string out_dir;

  bool operator==(const ExperimentConfig&) const = default;

  /// T for batch size b.
  std::uint64_t total_iterations(std::size_t b, std::size_t n) const {
    if (iterations > 0) return iterations;
    return epochs * (n / b);
  }
};

namespace detail {

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += f(v[i]);
  }
  return out;
}

inline std::uint64_t config_u64(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  if (!parse_u64(v, x))
    throw ConfigError(std::string(key) + ": expected a non-negative integer");
  return x;
}

inline double config_double(std::string_view key, std::string_view v) {
  double x = 0.0;
  if (!parse_double(v, x) || !std::isfinite(x))
    throw ConfigError(std::string(key) + ": expected a finite number");
  return x;
}

inline bool config_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(std::string(key) + ": expected true or false");
}

template <class T, class F>
std::vector<T> config_list(std::string_view key, std::string_view v, F f) {
  std::vector<T> out;
  for (auto item : split(v, ',')) out.push_back(f(key, trim(item)));
  if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
  return out;
}

}  // namespace detail

inline std::string format_config(const ExperimentConfig& c) {
  using detail::join;
  auto u = [](std::size_t x) { return std::to_string(x); };
  std::string o;
  o += "[experiment]\n";
  o += "kind = " + std::string(to_string(c.kind)) + "\n";
  o += "name = " + c.name + "\n";
  o += "\n[dataset]\n";
  o += "source = " + c.dataset.source + "\n";
  if (!c.dataset.path.empty()) o += "path = " + c.dataset.path + "\n";
  o += "d = " + u(c.dataset.d) + "\n";
  o += "n = " + u(c.dataset.n) + "\n";
  o += "gamma = " + format_double(c.dataset.gamma) + "\n";
  o += "gap = " + format_double(c.dataset.gap) + "\n";
  o += "seed = " + std::to_string(c.dataset.seed) + "\n";
  o += "holdout = " + u(c.dataset.holdout) + "\n";
  if (c.dataset.holdout_seed)
    o += "holdout_seed = " + std::to_string(*c.dataset.holdout_seed) + "\n";
  o += "\n[loss]\n";
  o += "kind = " + std::string(to_string(c.loss)) + "\n";
  o += "\n[sgd]\n";
  o += "mode = " + std::string(to_string(c.mode)) + "\n";
  o += "eta = " + format_eta_policy(c.eta) + "\n";
  o += "batch_sizes = " + join(c.batch_sizes, u) + "\n";
  if (c.iterations > 0) o += "iterations = " + std::to_string(c.iterations) + "\n";
  if (c.epochs > 0) o += "epochs = " + std::to_string(c.epochs) + "\n";
  o += "seed = " + std::to_string(c.seed) + "\n";
  o += "w0 = " + c.w0 + "\n";
  if (!c.order_file.empty()) o += "order_file = " + c.order_file + "\n";
  o += "snapshot_ratio = " + format_double(c.snapshot_ratio) + "\n";
  o += "\n[sweep]\n";
  o += "control = " + std::string(c.control ? "true" : "false") + "\n";
  o += "burn_in = " + format_double(c.burn_in) + "\n";
  o += "\n[probe]\n";
  o += "fractions = " +
       join(c.fractions, [](double x) { return format_double(x); }) + "\n";
  o += "\n[fig4]\n";
  o += "dims = " + join(c.dims, u) + "\n";
  if (!c.out_dir.empty()) o += "\n[output]\ndir = " + c.out_dir + "\n";
  return o;
}

/// Parses the flat [section] key = value text. Relative paths are kept as
/// written; see load_config for resolution.
inline ExperimentConfig parse_config(std::string_view text) {
  using namespace detail;
  ExperimentConfig c;
  c.batch_sizes.clear();
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::size_t lineno = 0;
  bool have_batches = false;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const char* known[] = {"experiment", "dataset", "loss", "sgd",
                                    "sweep", "probe", "fig4", "output"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) {
            return section == k;
          }) == std::end(known))
        throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside a section");
    const std::string key(trim(line.substr(0, eq)));
    const auto v = trim(line.substr(eq + 1));
    const std::string full = section + "." + key;
    if (seen.count(full))
      throw ConfigError(where + "duplicate key " + full);
    seen[full] = lineno;
    try {
      if (full == "experiment.kind") c.kind = parse_experiment_kind(v);
      else if (full == "experiment.name") c.name = std::string(v);
      else if (full == "dataset.source") {
        if (v != "synthesize" && v != "file")
          throw ConfigError("source must be synthesize or file");
        c.dataset.source = std::string(v);
      } else if (full == "dataset.path") c.dataset.path = std::string(v);
      else if (full == "dataset.d") c.dataset.d = config_u64(full, v);
      else if (full == "dataset.n") c.dataset.n = config_u64(full, v);
      else if (full == "dataset.gamma") c.dataset.gamma = config_double(full, v);
      else if (full == "dataset.gap") c.dataset.gap = config_double(full, v);
      else if (full == "dataset.seed") c.dataset.seed = config_u64(full, v);
      else if (full == "dataset.holdout") c.dataset.holdout = config_u64(full, v);
      else if (full == "dataset.holdout_seed")
        c.dataset.holdout_seed = config_u64(full, v);
      else if (full == "loss.kind") {
        if (v == "logistic") c.loss = LossKind::Logistic;
        else if (v == "exponential") c.loss = LossKind::Exponential;
        else throw ConfigError("loss must be logistic or exponential");
      } else if (full == "sgd.mode") c.mode = parse_sampling_mode(v);
      else if (full == "sgd.eta") c.eta = parse_eta_policy(v);
      else if (full == "sgd.batch_sizes") {
        c.batch_sizes = config_list<std::size_t>(full, v, config_u64);
        have_batches = true;
      } else if (full == "sgd.iterations") c.iterations = config_u64(full, v);
      else if (full == "sgd.epochs") c.epochs = config_u64(full, v);
      else if (full == "sgd.seed") c.seed = config_u64(full, v);
      else if (full == "sgd.w0") c.w0 = std::string(v);
      else if (full == "sgd.order_file") c.order_file = std::string(v);
      else if (full == "sgd.snapshot_ratio")
        c.snapshot_ratio = config_double(full, v);
      else if (full == "sweep.control") c.control = config_bool(full, v);
      else if (full == "sweep.burn_in") c.burn_in = config_double(full, v);
      else if (full == "probe.fractions")
        c.fractions = config_list<double>(full, v, config_double);
      else if (full == "fig4.dims")
        c.dims = config_list<std::size_t>(full, v, config_u64);
      else if (full == "output.dir") c.out_dir = std::string(v);
      else throw ConfigError("unknown key " + full);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const ScheduleError& e) {
      throw ConfigError(where + e.what());
    }
  }
  if (!have_batches) c.batch_sizes = {1};
  return c;
}

/// The kind named in [experiment], if any.
inline std::optional<ExperimentKind> declared_kind(std::string_view text) {
  std::string_view section;
  for (auto raw : split(text, '\n')) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (section == "experiment" && eq != std::string_view::npos &&
        trim(line.substr(0, eq)) == "kind")
      return parse_experiment_kind(trim(line.substr(eq + 1)));
  }
  return std::nullopt;
}

/// Checks cross-field constraints; throws ConfigError.
inline void validate_config(const ExperimentConfig& c) {
  if ((c.iterations > 0) == (c.epochs > 0))
    throw ConfigError("set exactly one of sgd.iterations and sgd.epochs");
  for (auto b : c.batch_sizes)
    if (b == 0) throw ConfigError("batch sizes must be positive");
  if (c.dataset.source == "file" && c.dataset.path.empty())
    throw ConfigError("dataset.path is required for source = file");
  if (c.mode == SamplingMode::Custom && c.order_file.empty())
    throw ConfigError("sgd.order_file is required for mode = custom");
  if (c.mode != SamplingMode::Custom && !c.order_file.empty())
    throw ConfigError("sgd.order_file is only valid with mode = custom");
  if (!(c.snapshot_ratio > 1.0))
    throw ConfigError("sgd.snapshot_ratio must exceed 1");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0))
    throw ConfigError("sweep.burn_in must lie in [0, 1)");
  if (c.kind == ExperimentKind::ScalingSweep && c.batch_sizes.size() < 2)
    throw ConfigError("a sweep needs at least two batch sizes");
  if (c.kind == ExperimentKind::ScalingSweep && c.epochs == 0)
    throw ConfigError("a sweep is specified in sgd.epochs");
  if (c.kind == ExperimentKind::BoundProbe && c.fractions.empty())
    throw ConfigError("probe.fractions is empty");
  for (double f : c.fractions)
    if (!(f > 0.0)) throw ConfigError("probe fractions must be > 0");
  if (c.loss == LossKind::Exponential &&
      (c.eta.kind == EtaPolicy::Kind::FractionOfBound ||
       c.kind == ExperimentKind::BoundProbe))
    throw ConfigError("the exponential loss has no finite smoothness bound");
}

/// Reads, parses and validates a config file. Relative dataset and order
/// paths are resolved against the file's directory.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig c = parse_config(text);
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (base / p).lexically_normal().string();
  };
  resolve(c.dataset.path);
  resolve(c.order_file);
  validate_config(c);
  return c;
}

}  // namespace septrack
