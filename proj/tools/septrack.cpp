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

// Command-line front end for the experiment harness.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "septrack.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerdict = 3;

void print_verdicts(const std::vector<septrack::Verdict>& vs) {
  for (const auto& v : vs)
    std::printf("%-4s %-24s %s\n", std::string(septrack::to_string(v.status)).c_str(),
                v.name.c_str(), v.detail.c_str());
}

int run_verb(septrack::ExperimentKind kind, const std::string& config_path,
             const septrack::RunOptions& opt) {
  using namespace septrack;
  ExperimentConfig cfg;
  try {
    const auto text = read_file(config_path);
    const auto declared = declared_kind(text);
    cfg = load_config(config_path);
    if (declared && *declared != kind) {
      std::fprintf(stderr, "config error: %s declares kind '%s'\n",
                   config_path.c_str(), std::string(to_string(*declared)).c_str());
      return kExitConfig;
    }
    cfg.kind = kind;
    validate_config(cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }
  try {
    const auto rec = run_experiment(cfg, opt);
    print_verdicts(rec.verdicts);
    for (const auto& n : rec.notes) std::printf("note %s\n", n.c_str());
    std::printf("wrote %zu files to %s\n", rec.files.size() + 1,
                (opt.out_dir.empty() ? cfg.out_dir : opt.out_dir).c_str());
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const ScheduleError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DatasetError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitOk;
}

int report_verb(const std::string& dir) {
  try {
    const auto r = septrack::report(dir);
    print_verdicts(r.verdicts);
    for (const auto& p : r.problems) std::printf("problem %s\n", p.c_str());
    return r.ok() ? kExitOk : kExitVerdict;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD on separable data: runs, sweeps, probes and reports"};
  app.require_subcommand(1);

  septrack::RunOptions opt;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  app.add_option("--out", opt.out_dir, "Output directory (overrides [output] dir)");
  app.add_option("--seed", seed, "Seed for both the dataset and the sampler");
  app.add_option("--threads", threads, "Worker threads for independent sub-runs")
      ->check(CLI::Range(1u, 1024u));
  app.fallthrough();

  struct Verb {
    const char* name;
    septrack::ExperimentKind kind;
    const char* help;
  };
  const Verb verbs[] = {
      {"run", septrack::ExperimentKind::SingleRun, "Single SGD run"},
      {"sweep", septrack::ExperimentKind::ScalingSweep, "Batch-size scaling sweep"},
      {"probe", septrack::ExperimentKind::BoundProbe, "Learning-rate bound probe"},
      {"fig2", septrack::ExperimentKind::Fig2, "Norm, loss, angle and margin figures"},
      {"fig4", septrack::ExperimentKind::Fig4, "Figure pipeline at several dimensions"},
  };
  std::string config_path;
  std::optional<septrack::ExperimentKind> chosen;
  for (const auto& v : verbs) {
    auto* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("config", config_path, "Experiment config file")->required();
    sub->callback([&chosen, &v] { chosen = v.kind; });
  }
  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Recompute verdicts from a run directory");
  rep->add_option("run-dir", run_dir, "Directory written by an experiment")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  opt.seed = seed;
  opt.threads = threads;
  if (rep->parsed()) return report_verb(run_dir);
  return run_verb(*chosen, config_path, opt);
}
