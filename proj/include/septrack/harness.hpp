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

/// @file harness.hpp
/// Experiment runner: single runs, batch-size scaling sweeps, learning-rate
/// bound probes and the figure pipelines, with persisted CSVs, SVG plots
/// and a run record whose verdicts can be recomputed from the files alone.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "septrack/analysis.hpp"
#include "septrack/config.hpp"
#include "septrack/dataset.hpp"
#include "septrack/io.hpp"
#include "septrack/plot.hpp"
#include "septrack/sgd.hpp"
#include "septrack/svm.hpp"

namespace septrack {

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------- threads

/// Runs fn(0..n-1) on up to `threads` workers. Each index is handled
/// exactly once; the first exception (by index) is rethrown after joining.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ------------------------------------------------------------ verdicts

enum class VerdictStatus { Pass, Fail, Skip };

inline std::string_view to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::Pass: return "pass";
    case VerdictStatus::Fail: return "fail";
    case VerdictStatus::Skip: return "skip";
  }
  return "?";
}

inline VerdictStatus parse_verdict_status(std::string_view s) {
  if (s == "pass") return VerdictStatus::Pass;
  if (s == "fail") return VerdictStatus::Fail;
  if (s == "skip") return VerdictStatus::Skip;
  throw ParseError("unknown verdict status '" + std::string(s) + "'");
}

struct Verdict {
  std::string name;
  VerdictStatus status = VerdictStatus::Skip;
  std::string detail;

  bool operator==(const Verdict&) const = default;
};

/// Thresholds used by the verdicts.
struct Thresholds {
  double loss_decrease = 1e-3;      // final / initial loss
  double exponent_tol = 0.15;       // |exponent + 1|
  double min_r2 = 0.98;             // power-law fit
  double direction_max = 0.05;      // direction distance at T
  double direction_jitter = 1e-3;   // allowed increase between snapshots
  double growth_max = 1.5;          // rate-product boundedness
  double margin_max = 0.1;          // margin gap at T
  double sumsq_growth = 0.01;       // final-decade share of sum |dw|^2
  double norm_growth = 2.0;         // |w(T)| / |w(T/1000)|
  double residual_shrink = 0.5;     // r(T) / r(T/100)
  double rho_growth = 1.2;          // residual boundedness
  double val_r2 = 0.9;
  double coincidence_max = 0.15;
  double control_factor = 3.0;
};

namespace detail {

inline std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline Verdict make_verdict(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok ? VerdictStatus::Pass : VerdictStatus::Fail,
          std::move(detail)};
}

inline Verdict skip(std::string name, std::string why) {
  return {std::move(name), VerdictStatus::Skip, std::move(why)};
}

}  // namespace detail

// --------------------------------------------------- trajectory tables

struct TrajectoryRow {
  std::uint64_t t = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double w_norm = 0.0;
  double sumsq = 0.0;
};

inline std::vector<TrajectoryRow> parse_trajectory_csv(std::string_view text) {
  std::vector<TrajectoryRow> out;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "t,loss,grad_norm,w_norm,sumsq_steps")
        throw ParseError("line 1: unexpected trajectory header");
      continue;
    }
    const auto f = split(line, ',');
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (f.size() != 5) throw ParseError(where + "expected 5 fields");
    TrajectoryRow r;
    if (!parse_u64(f[0], r.t) || !parse_double(f[1], r.loss) ||
        !parse_double(f[2], r.grad_norm) || !parse_double(f[3], r.w_norm) ||
        !parse_double(f[4], r.sumsq))
      throw ParseError(where + "bad number");
    out.push_back(r);
  }
  if (out.empty()) throw ParseError("empty trajectory");
  return out;
}

namespace detail {

// Last row with t <= target, or nullptr.
inline const TrajectoryRow* at_or_before(const std::vector<TrajectoryRow>& rows,
                                         std::uint64_t target) {
  const TrajectoryRow* best = nullptr;
  for (const auto& r : rows)
    if (r.t <= target) best = &r;
  return best;
}

inline const DiagnosticsFrame* frame_at(
    const std::vector<DiagnosticsFrame>& fr, std::uint64_t t) {
  for (const auto& f : fr)
    if (f.t == t) return &f;
  return nullptr;
}

}  // namespace detail

/// Verdicts for one trajectory, computed only from its trajectory and
/// diagnostics tables. Checks without enough data are skipped.
inline std::vector<Verdict> trajectory_verdicts(
    const std::vector<TrajectoryRow>& rows,
    const std::vector<DiagnosticsFrame>& frames, const std::string& prefix,
    const Thresholds& th = {}) {
  using detail::make_verdict;
  using detail::num;
  using detail::skip;
  std::vector<Verdict> v;
  const auto& first = rows.front();
  const auto& last = rows.back();
  const std::uint64_t total = last.t;
  const double T = static_cast<double>(total);

  {
    const double ratio = last.loss / first.loss;
    v.push_back(make_verdict(prefix + "loss_decrease",
                             ratio <= th.loss_decrease,
                             "final/initial=" + num(ratio)));
  }

  {
    Series s;
    for (const auto& r : rows)
      if (r.t > 0 && static_cast<double>(r.t) >= T / 10.0)
        s.push(static_cast<double>(r.t), r.loss);
    bool positive = true;
    for (double y : s.y) positive = positive && y > 0.0;
    if (total < 1000) {
      v.push_back(skip(prefix + "loss_rate", "T < 1000"));
    } else if (s.size() < 10 || !positive) {
      v.push_back(skip(prefix + "loss_rate", "fewer than 10 final-decade points"));
    } else {
      const auto f = fit_power_law(s);
      v.push_back(make_verdict(
          prefix + "loss_rate",
          std::abs(f.exponent + 1.0) <= th.exponent_tol && f.r2 > th.min_r2,
          "exponent=" + num(f.exponent) + " r2=" + num(f.r2)));
    }
  }

  {
    auto dd = column(frames, [](const DiagnosticsFrame& f) { return f.dir_dist; });
    auto late = window(dd, T / 10.0, T);
    if (total < 1000 || late.size() < 2 || dd.t.back() != T) {
      v.push_back(skip(prefix + "direction", "too few snapshots"));
    } else {
      double jump = 0.0;
      for (std::size_t i = 1; i < late.size(); ++i)
        jump = std::max(jump, late.y[i] - late.y[i - 1]);
      v.push_back(make_verdict(
          prefix + "direction",
          late.y.back() < th.direction_max && jump <= th.direction_jitter,
          "dir_dist(T)=" + num(late.y.back()) + " max_increase=" + num(jump)));
    }
  }

  auto product = [&](auto get, double power) {
    return column(frames, [&](const DiagnosticsFrame& f) -> std::optional<double> {
      const auto x = get(f);
      if (!x) return std::nullopt;
      return *x * std::pow(std::log(static_cast<double>(f.t)), power);
    });
  };
  auto bounded_check = [&](const std::string& name, const Series& s,
                           std::optional<double> final_value,
                           double final_limit) {
    const auto late = window(s, T / 10.0 * (1 + 1e-12), T);
    const auto mid = window(s, std::cbrt(T), std::cbrt(T * T));
    if (late.size() < 1 || mid.size() < 1 || T < 1000.0) {
      v.push_back(skip(prefix + name, "too few snapshots"));
      return;
    }
    const double g = mid_run_growth(s, T);
    bool ok = g <= th.growth_max;
    std::string detail = "growth=" + num(g);
    if (final_value) {
      ok = ok && *final_value < final_limit;
      detail += " final=" + num(*final_value);
    }
    v.push_back(make_verdict(prefix + name, ok, detail));
  };
  bounded_check("angle_rate",
                product([](const DiagnosticsFrame& f) { return f.angle_gap; }, 2.0),
                std::nullopt, 0.0);
  {
    const auto* lf = detail::frame_at(frames, total);
    bounded_check("margin_rate",
                  product([](const DiagnosticsFrame& f) { return f.margin_gap; }, 1.0),
                  lf ? lf->margin_gap : std::nullopt, th.margin_max);
  }

  {
    const auto* r10 = detail::at_or_before(rows, total / 10);
    if (r10 == nullptr || total < 1000 || !(last.sumsq > 0.0)) {
      v.push_back(skip(prefix + "sumsq_cauchy", "too few snapshots"));
    } else {
      const double g = (last.sumsq - r10->sumsq) / last.sumsq;
      v.push_back(make_verdict(prefix + "sumsq_cauchy", g < th.sumsq_growth,
                               "final_decade_share=" + num(g)));
    }
  }

  {
    const auto* r = detail::at_or_before(rows, total / 1000);
    if (total < 1000 || r == nullptr || r->t == 0) {
      v.push_back(skip(prefix + "norm_growth", "T < 1000"));
    } else {
      const double g = last.w_norm / r->w_norm;
      v.push_back(make_verdict(prefix + "norm_growth", g > th.norm_growth,
                               "ratio=" + num(g)));
    }
  }

  {
    const auto* a = detail::frame_at(frames, total);
    const auto* b = detail::frame_at(frames, total / 100);
    if (a == nullptr || b == nullptr || !a->r_norm || !b->r_norm) {
      v.push_back(skip(prefix + "residual_r", "pre-asymptotic or no w_tilde"));
    } else {
      v.push_back(make_verdict(prefix + "residual_r",
                               *a->r_norm < th.residual_shrink * *b->r_norm,
                               "r(T)=" + num(*a->r_norm) +
                                   " r(T/100)=" + num(*b->r_norm)));
    }
  }

  {
    auto rho = column(frames, [](const DiagnosticsFrame& f) { return f.rho_norm; });
    const auto late = window(rho, T / 10.0 * (1 + 1e-12), T);
    const auto prev = window(rho, T / 100.0 * (1 + 1e-12), T / 10.0);
    const auto all_prev = window(rho, 0.0, T / 100.0);
    if (late.size() < 1 || prev.size() < 1 || all_prev.size() < 1) {
      v.push_back(skip(prefix + "rho_bounded", "pre-asymptotic"));
    } else {
      const double g = decade_growth(rho, T);
      v.push_back(make_verdict(prefix + "rho_bounded", g <= th.rho_growth,
                               "growth=" + num(g)));
    }
  }

  {
    auto val = window(column(frames, [](const DiagnosticsFrame& f) { return f.val_loss; }),
                      T / 100.0, T);
    if (val.size() < 10) {
      v.push_back(skip(prefix + "val_loss_growth", "no validation set"));
    } else {
      std::vector<double> lx;
      for (double t : val.t) lx.push_back(std::log(t));
      const auto f = fit_linear(lx, val.y);
      v.push_back(make_verdict(prefix + "val_loss_growth",
                               f.slope > 0.0 && f.r2 > th.val_r2,
                               "slope=" + num(f.slope) + " r2=" + num(f.r2)));
    }
  }
  return v;
}

// --------------------------------------------------------- epoch tables

/// Values on a common epoch grid, one column per batch size. Missing
/// values (diverged runs) are NaN.
struct EpochTable {
  std::vector<std::uint64_t> epochs;
  std::vector<std::size_t> batch_sizes;
  std::vector<std::vector<double>> columns;  // columns[j][i]
};

inline std::string epoch_table_csv(const EpochTable& t) {
  std::string out = "epoch";
  for (auto b : t.batch_sizes) out += ",B" + std::to_string(b);
  out += '\n';
  for (std::size_t i = 0; i < t.epochs.size(); ++i) {
    out += std::to_string(t.epochs[i]);
    for (const auto& c : t.columns) out += ',' + format_double(c[i]);
    out += '\n';
  }
  return out;
}

inline EpochTable parse_epoch_table(std::string_view text) {
  EpochTable t;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto f = split(line, ',');
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (lineno == 1) {
      if (f.empty() || f[0] != "epoch")
        throw ParseError("line 1: unexpected epoch table header");
      for (std::size_t j = 1; j < f.size(); ++j) {
        std::uint64_t b = 0;
        if (f[j].size() < 2 || f[j][0] != 'B' || !parse_u64(f[j].substr(1), b))
          throw ParseError("line 1: bad column '" + std::string(f[j]) + "'");
        t.batch_sizes.push_back(b);
      }
      t.columns.resize(t.batch_sizes.size());
      continue;
    }
    if (f.size() != t.batch_sizes.size() + 1)
      throw ParseError(where + "wrong field count");
    std::uint64_t e = 0;
    if (!parse_u64(f[0], e)) throw ParseError(where + "bad epoch");
    t.epochs.push_back(e);
    for (std::size_t j = 1; j < f.size(); ++j) {
      double x = 0.0;
      if (!parse_double(f[j], x)) throw ParseError(where + "bad number");
      t.columns[j - 1].push_back(x);
    }
  }
  return t;
}

/// Builds an epoch table from trajectories that share one epoch grid.
inline EpochTable epoch_table(const std::vector<std::size_t>& batch_sizes,
                              const std::vector<std::vector<std::uint64_t>>& epochs,
                              const std::vector<std::vector<double>>& values) {
  EpochTable t;
  t.batch_sizes = batch_sizes;
  std::size_t longest = 0;
  for (std::size_t j = 1; j < epochs.size(); ++j)
    if (epochs[j].size() > epochs[longest].size()) longest = j;
  if (!epochs.empty()) t.epochs = epochs[longest];
  for (std::size_t j = 0; j < epochs.size(); ++j) {
    const std::size_t m = std::min(epochs[j].size(), t.epochs.size());
    if (!std::equal(epochs[j].begin(), epochs[j].begin() + static_cast<std::ptrdiff_t>(m),
                    t.epochs.begin()))
      throw HarnessError("misaligned epoch grids");
    std::vector<double> col(t.epochs.size(), std::nan(""));
    for (std::size_t i = 0; i < m; ++i) col[i] = values[j][i];
    t.columns.push_back(std::move(col));
  }
  return t;
}

/// max over epochs e >= burn_in_epochs and over B of |log L_B(e) - log
/// L_ref(e)|, where the reference is the largest batch size (full-batch GD
/// when B = N). NaN entries make the result infinite.
inline double scaling_coincidence(const EpochTable& t, double burn_in_epochs) {
  if (t.batch_sizes.size() < 2)
    throw HarnessError("scaling_coincidence needs >= 2 batch sizes");
  for (const auto& c : t.columns)
    if (c.size() != t.epochs.size()) throw HarnessError("misaligned epoch grids");
  const std::size_t ref = static_cast<std::size_t>(
      std::max_element(t.batch_sizes.begin(), t.batch_sizes.end()) -
      t.batch_sizes.begin());
  double worst = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < t.epochs.size(); ++i) {
    if (static_cast<double>(t.epochs[i]) < burn_in_epochs) continue;
    ++used;
    const double lr = std::log(t.columns[ref][i]);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      const double d = std::abs(std::log(t.columns[j][i]) - lr);
      if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, d);
    }
  }
  if (used == 0) throw HarnessError("no epochs past burn-in");
  return worst;
}

// --------------------------------------------------------------- probe

struct ProbeRow {
  std::size_t batch_size = 1;
  double fraction = 0.0;
  double eta = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
  std::uint64_t diverged_at = 0;
};

inline constexpr const char* kProbeHeader =
    "B,fraction,eta,initial_loss,final_loss,diverged,diverged_at";

inline std::string probe_csv(const std::vector<ProbeRow>& rows) {
  std::string out = std::string(kProbeHeader) + '\n';
  for (const auto& r : rows)
    out += std::to_string(r.batch_size) + ',' + format_double(r.fraction) +
           ',' + format_double(r.eta) + ',' + format_double(r.initial_loss) +
           ',' + format_double(r.final_loss) + ',' + (r.diverged ? "1" : "0") +
           ',' + std::to_string(r.diverged_at) + '\n';
  return out;
}

inline std::vector<ProbeRow> parse_probe_csv(std::string_view text) {
  std::vector<ProbeRow> out;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kProbeHeader) throw ParseError("line 1: unexpected probe header");
      continue;
    }
    const auto f = split(line, ',');
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (f.size() != 7) throw ParseError(where + "expected 7 fields");
    ProbeRow r;
    std::uint64_t b = 0, dv = 0;
    if (!parse_u64(f[0], b) || !parse_double(f[1], r.fraction) ||
        !parse_double(f[2], r.eta) || !parse_double(f[3], r.initial_loss) ||
        !parse_double(f[4], r.final_loss) || !parse_u64(f[5], dv) ||
        !parse_u64(f[6], r.diverged_at))
      throw ParseError(where + "bad field");
    r.batch_size = b;
    r.diverged = dv != 0;
    out.push_back(r);
  }
  return out;
}

/// Runs at eta = fraction * bound for each fraction, where the bound is the
/// one matching the sampling mode.
inline std::vector<ProbeRow> bound_probe(const Dataset& data,
                                         const LossSpec& loss, std::size_t b,
                                         SamplingMode mode,
                                         const std::vector<double>& fractions,
                                         std::uint64_t total,
                                         std::uint64_t seed = 1,
                                         const std::vector<Batch>& order = {},
                                         unsigned threads = 1) {
  const auto sol = solve_hard_margin(data);
  const double sigma = spectral_norm(data.matrix());
  const std::size_t k = batches_per_epoch(data.size(), b);
  const double bound =
      learning_rate_bound(mode, sol.gamma, loss.beta(), sigma, b, k);
  std::vector<ProbeRow> rows(fractions.size());
  parallel_for(fractions.size(), threads, [&](std::size_t i) {
    SgdConfig c;
    c.eta = fractions[i] * bound;
    c.batch_size = b;
    c.iterations = total;
    c.mode = mode;
    c.seed = seed;
    c.loss = loss;
    c.custom_order = order;
    c.snapshots.ratio = 10.0;
    const auto tr = run(c, data);
    ProbeRow& r = rows[i];
    r.batch_size = b;
    r.fraction = fractions[i];
    r.eta = c.eta;
    r.initial_loss = tr.initial().loss;
    r.final_loss = tr.final().loss;
    r.diverged = tr.diverged;
    r.diverged_at = tr.diverged_at;
  });
  return rows;
}

inline std::vector<Verdict> probe_verdicts(const std::vector<ProbeRow>& rows,
                                           const Thresholds& th = {}) {
  std::vector<Verdict> v;
  bool ok = true;
  std::size_t checked = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (r.fraction > 1.0) continue;
    ++checked;
    const double ratio = r.diverged ? std::numeric_limits<double>::infinity()
                                    : r.final_loss / r.initial_loss;
    worst = std::max(worst, ratio);
    ok = ok && ratio <= th.loss_decrease;
  }
  if (checked == 0)
    v.push_back(detail::skip("probe_converged", "no fraction <= 1"));
  else
    v.push_back(detail::make_verdict("probe_converged", ok,
                                     "worst final/initial=" + detail::num(worst)));
  return v;
}

// ---------------------------------------------------------- run record

struct DatasetSummary {
  std::string label;
  std::string fingerprint;
  double gamma = 0.0;
  double sigma_max = 0.0;
  std::vector<std::size_t> support;  // 1-based
  bool spans_data = false;

  bool operator==(const DatasetSummary&) const = default;
};

struct RunRecord {
  ExperimentKind kind = ExperimentKind::SingleRun;
  std::string name;
  std::string config_file = "config.ini";
  std::vector<DatasetSummary> datasets;
  std::vector<std::string> diagnostics;  // paths relative to the run dir
  std::vector<std::string> files;        // every file written
  std::vector<Verdict> verdicts;
  std::vector<std::string> notes;

  bool operator==(const RunRecord&) const = default;

  bool all_passed() const {
    return std::none_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) {
      return v.status == VerdictStatus::Fail;
    });
  }
};

inline std::string format_record(const RunRecord& r) {
  auto list = [](const std::vector<std::string>& v) {
    return detail::join(v, [](const std::string& s) { return s; });
  };
  std::string o = "[record]\n";
  o += "kind = " + std::string(to_string(r.kind)) + "\n";
  o += "name = " + r.name + "\n";
  o += "config = " + r.config_file + "\n";
  o += "diagnostics = " + list(r.diagnostics) + "\n";
  o += "files = " + list(r.files) + "\n";
  for (const auto& d : r.datasets) {
    o += "\n[dataset " + d.label + "]\n";
    o += "fingerprint = " + d.fingerprint + "\n";
    o += "gamma = " + format_double(d.gamma) + "\n";
    o += "sigma_max = " + format_double(d.sigma_max) + "\n";
    o += "support = " +
         detail::join(d.support, [](std::size_t i) { return std::to_string(i); }) +
         "\n";
    o += "spans_data = " + std::string(d.spans_data ? "true" : "false") + "\n";
  }
  o += "\n[verdicts]\n";
  for (const auto& v : r.verdicts)
    o += v.name + " = " + std::string(to_string(v.status)) + " ; " + v.detail + "\n";
  if (!r.notes.empty()) {
    o += "\n[notes]\n";
    for (std::size_t i = 0; i < r.notes.size(); ++i)
      o += "note" + std::to_string(i + 1) + " = " + r.notes[i] + "\n";
  }
  return o;
}

inline RunRecord parse_record(std::string_view text) {
  RunRecord r;
  std::string section;
  std::size_t lineno = 0;
  auto list = [](std::string_view v) {
    std::vector<std::string> out;
    if (trim(v).empty()) return out;
    for (auto s : split(v, ',')) out.emplace_back(trim(s));
    return out;
  };
  for (auto raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      section = std::string(line.substr(1, line.size() - 2));
      if (section.rfind("dataset ", 0) == 0) {
        r.datasets.emplace_back();
        r.datasets.back().label = section.substr(8);
        section = "dataset";
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto v = trim(line.substr(eq + 1));
    if (section == "record") {
      if (key == "kind") r.kind = parse_experiment_kind(v);
      else if (key == "name") r.name = std::string(v);
      else if (key == "config") r.config_file = std::string(v);
      else if (key == "diagnostics") r.diagnostics = list(v);
      else if (key == "files") r.files = list(v);
      else throw ParseError(where + "unknown key " + key);
    } else if (section == "dataset") {
      auto& d = r.datasets.back();
      if (key == "fingerprint") d.fingerprint = std::string(v);
      else if (key == "gamma") {
        if (!parse_double(v, d.gamma)) throw ParseError(where + "bad gamma");
      } else if (key == "sigma_max") {
        if (!parse_double(v, d.sigma_max)) throw ParseError(where + "bad sigma_max");
      } else if (key == "support") {
        for (const auto& s : list(v)) {
          std::uint64_t i = 0;
          if (!parse_u64(s, i)) throw ParseError(where + "bad support index");
          d.support.push_back(i);
        }
      } else if (key == "spans_data") d.spans_data = v == "true";
      else throw ParseError(where + "unknown key " + key);
    } else if (section == "verdicts") {
      const auto semi = v.find(';');
      Verdict vd;
      vd.name = key;
      vd.status = parse_verdict_status(trim(v.substr(0, semi)));
      if (semi != std::string_view::npos) vd.detail = std::string(trim(v.substr(semi + 1)));
      r.verdicts.push_back(std::move(vd));
    } else if (section == "notes") {
      r.notes.emplace_back(v);
    } else {
      throw ParseError(where + "unknown section");
    }
  }
  return r;
}

// ------------------------------------------------------ recomputation

using FileReader = std::function<std::string(const std::string&)>;

/// Recomputes every verdict of an experiment from its persisted CSVs.
inline std::vector<Verdict> recompute_verdicts(const ExperimentConfig& c,
                                               const FileReader& read,
                                               const Thresholds& th = {}) {
  std::vector<Verdict> v;
  auto single = [&](const std::string& dir, const std::string& prefix) {
    const std::string base = dir.empty() ? "" : dir + "/";
    const auto rows = parse_trajectory_csv(read(base + "trajectory.csv"));
    const auto frames = parse_diagnostics_csv(read(base + "diagnostics.csv"));
    auto r = trajectory_verdicts(rows, frames, prefix, th);
    v.insert(v.end(), r.begin(), r.end());
  };
  switch (c.kind) {
    case ExperimentKind::SingleRun:
    case ExperimentKind::Fig2:
      single("", "");
      break;
    case ExperimentKind::Fig4:
      for (auto d : c.dims) {
        const std::string dir = "d" + std::to_string(d);
        single(dir, dir + ".");
      }
      break;
    case ExperimentKind::ScalingSweep: {
      const double burn = c.burn_in * static_cast<double>(c.epochs);
      const auto t = parse_epoch_table(read("loss_epochs.csv"));
      const double sc = scaling_coincidence(t, burn);
      v.push_back(detail::make_verdict("coincidence", sc <= th.coincidence_max,
                                       "value=" + detail::num(sc)));
      if (c.control) {
        const auto ct = parse_epoch_table(read("control_loss_epochs.csv"));
        const double cc = scaling_coincidence(ct, burn);
        v.push_back(detail::make_verdict(
            "control_separation", cc >= th.control_factor * sc,
            "control=" + detail::num(cc) + " sweep=" + detail::num(sc)));
      }
      break;
    }
    case ExperimentKind::BoundProbe: {
      auto r = probe_verdicts(parse_probe_csv(read("probe.csv")), th);
      v.insert(v.end(), r.begin(), r.end());
      break;
    }
  }
  return v;
}

// ---------------------------------------------------------- experiments

struct RunOptions {
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;  // replaces dataset and sampler seeds
  std::string out_dir;                // replaces output.dir when set
};

namespace detail {

struct Prepared {
  Dataset data;
  std::optional<Dataset> holdout;
  SvmSolution sol;
  double sigma = 0.0;
  LossSpec loss = logistic_loss();
  std::vector<Batch> order;
};

inline LossSpec make_loss(LossKind k) {
  return k == LossKind::Exponential ? exponential_loss() : logistic_loss();
}

inline Prepared prepare(const ExperimentConfig& c, std::size_t d) {
  Prepared p;
  if (c.dataset.source == "file") {
    p.data = load_csv(c.dataset.path);
    if (c.dataset.holdout > 0)
      throw ConfigError("a holdout set needs source = synthesize");
  } else {
    p.data = synthesize(d, c.dataset.n, c.dataset.gamma, c.dataset.gap,
                        c.dataset.seed);
    if (c.dataset.holdout > 0)
      p.holdout = synthesize_holdout(d, c.dataset.holdout, c.dataset.gamma,
                                     c.dataset.seed,
                                     c.dataset.effective_holdout_seed());
  }
  p.sol = solve_hard_margin(p.data);
  p.sigma = spectral_norm(p.data.matrix());
  p.loss = make_loss(c.loss);
  if (!c.order_file.empty()) p.order = load_order_file(c.order_file);
  return p;
}

inline Vector make_w0(const ExperimentConfig& c, std::size_t d) {
  if (c.w0 == "zeros") return Vector(d, 0.0);
  if (c.w0 == "normal") {
    Rng rng(derive_seed(c.seed, 32));
    Vector w(d);
    for (auto& x : w) x = rng.normal();
    return w;
  }
  Vector w;
  std::vector<double> vals;
  for (auto s : split(c.w0, ',')) {
    double x = 0.0;
    if (!parse_double(s, x)) throw ConfigError("w0: bad value");
    vals.push_back(x);
  }
  if (vals.size() != d) throw ConfigError("w0 has the wrong dimension");
  return Vector(vals);
}

inline DatasetSummary summarize(const std::string& label, const Prepared& p) {
  DatasetSummary s;
  s.label = label;
  s.fingerprint = hex64(p.data.fingerprint());
  s.gamma = p.sol.gamma;
  s.sigma_max = p.sigma;
  for (auto i : p.sol.support) s.support.push_back(i + 1);
  s.spans_data = p.sol.spans_data;
  return s;
}

struct Writer {
  std::filesystem::path root;
  std::vector<std::string>* files;

  void put(const std::string& rel, const std::string& text) {
    write_file_atomic(root / rel, text);
    files->push_back(rel);
  }
};

inline std::string join_path(const std::string& dir, const std::string& f) {
  return dir.empty() ? f : dir + "/" + f;
}

struct SingleOutput {
  Trajectory trajectory;
  std::vector<DiagnosticsFrame> frames;
  std::optional<WTilde> w_tilde;
  std::vector<std::string> notes;
  std::map<std::string, std::string> files;  // rel path -> text
};

inline SingleOutput run_single(const ExperimentConfig& c, const Prepared& p,
                               std::size_t b, double eta, const std::string& dir,
                               SnapshotPolicy snaps) {
  SingleOutput out;
  SgdConfig s;
  s.eta = eta;
  s.batch_size = b;
  s.iterations = c.total_iterations(b, p.data.size());
  s.mode = c.mode;
  s.seed = c.seed;
  s.w0 = make_w0(c, p.data.dim());
  s.loss = p.loss;
  s.snapshots = std::move(snaps);
  s.custom_order = p.order;
  out.trajectory = run(s, p.data);
  const auto& tr = out.trajectory;
  for (const auto& w : tr.warnings) out.notes.push_back(dir + ": " + w);
  if (tr.diverged)
    out.notes.push_back(join_path(dir, "run") + ": diverged at t=" +
                        std::to_string(tr.diverged_at));
  try {
    out.w_tilde = solve_w_tilde(p.sol, p.data, s.w0);
    if (!out.w_tilde->generic)
      out.notes.push_back(join_path(dir, "w_tilde") + ": non-generic, residual " +
                          format_double(out.w_tilde->residual));
  } catch (const AnalysisError& e) {
    out.notes.push_back(join_path(dir, "w_tilde") + ": " + e.what());
  }
  DiagnosticsInput in;
  in.data = &p.data;
  in.sol = &p.sol;
  in.w_tilde = out.w_tilde ? &out.w_tilde->w_tilde : nullptr;
  in.valset = p.holdout ? &*p.holdout : nullptr;
  in.loss = p.loss;
  out.frames = compute_diagnostics(tr, in);
  out.files[join_path(dir, "trajectory.csv")] = trajectory_csv(tr);
  out.files[join_path(dir, "weights.csv")] = weights_csv(tr);
  out.files[join_path(dir, "diagnostics.csv")] = diagnostics_csv(out.frames);
  return out;
}

inline SnapshotPolicy single_snapshots(const ExperimentConfig& c,
                                       std::uint64_t total) {
  SnapshotPolicy s;
  s.ratio = c.snapshot_ratio;
  s.extra = {total / 10, total / 100, total / 1000};
  return s;
}

inline double resolve_eta(const ExperimentConfig& c, const Prepared& p,
                          std::size_t b) {
  if (c.eta.kind == EtaPolicy::Kind::Explicit) return c.eta.value;
  const std::size_t k = batches_per_epoch(p.data.size(), b);
  return c.eta.value * learning_rate_bound(c.mode, p.sol.gamma, p.loss.beta(),
                                           p.sigma, b, k);
}

inline PlotSeries series_of(const std::string& label,
                            const std::vector<DiagnosticsFrame>& fr,
                            const std::function<std::optional<double>(
                                const DiagnosticsFrame&)>& get) {
  PlotSeries s;
  s.label = label;
  for (const auto& f : fr) {
    if (f.t == 0) continue;
    if (auto v = get(f)) {
      s.x.push_back(static_cast<double>(f.t));
      s.y.push_back(*v);
    }
  }
  return s;
}

inline void figure_plots(const Prepared& p, const SingleOutput& o,
                         const std::string& dir, const std::string& label,
                         std::map<std::string, std::string>& files) {
  const auto& fr = o.frames;
  const auto& tr = o.trajectory;
  const double wt = norm(tr.final().w);
  PlotSeries nrm{label, {}, {}};
  for (const auto& s : tr.snapshots) {
    if (s.t == 0) continue;
    nrm.x.push_back(static_cast<double>(s.t));
    nrm.y.push_back(wt > 0.0 ? norm(s.w) / wt : 0.0);
  }
  files[join_path(dir, "norm.svg")] =
      svg_line_plot({"normalized |w(t)|", "t", "|w(t)| / |w(T)|", true, false}, {nrm});
  files[join_path(dir, "loss.svg")] = svg_line_plot(
      {"training loss", "t", "L(w(t))", true, true},
      {series_of(label, fr, [](const DiagnosticsFrame& f) { return std::optional(f.loss); })});
  files[join_path(dir, "angle_gap.svg")] = svg_line_plot(
      {"angle gap", "t", "1 - cos(w, w_hat)", true, true},
      {series_of(label, fr, [](const DiagnosticsFrame& f) { return f.angle_gap; })});
  files[join_path(dir, "margin_gap.svg")] = svg_line_plot(
      {"margin gap", "t", "gamma - min margin", true, true},
      {series_of(label, fr, [](const DiagnosticsFrame& f) { return f.margin_gap; })});
  if (p.holdout)
    files[join_path(dir, "val_loss.svg")] = svg_line_plot(
        {"validation loss", "t", "L_val(w(t))", true, false},
        {series_of(label, fr, [](const DiagnosticsFrame& f) { return f.val_loss; })});
  if (p.data.dim() == 2) {
    std::vector<double> xs, ys;
    for (std::size_t n = 0; n < p.data.size(); ++n) {
      xs.push_back(p.data.sample(n)[0]);
      ys.push_back(p.data.sample(n)[1]);
    }
    files[join_path(dir, "dataset.svg")] =
        svg_scatter_2d("dataset (labels absorbed)", xs, ys, p.sol.w_hat[0], p.sol.w_hat[1]);
  }
}

inline void emit(Writer& w, const std::map<std::string, std::string>& files) {
  for (const auto& [rel, text] : files) w.put(rel, text);
}

}  // namespace detail

/// Runs one experiment and writes its outputs under the output directory.
/// Sub-run divergence is recorded in the notes and verdicts, not thrown.
inline RunRecord run_experiment(ExperimentConfig c, const RunOptions& opt = {}) {
  using namespace detail;
  if (opt.seed) {
    c.dataset.seed = *opt.seed;
    c.seed = *opt.seed;
  }
  if (!opt.out_dir.empty()) c.out_dir = opt.out_dir;
  if (c.out_dir.empty()) throw ConfigError("no output directory");
  validate_config(c);
  const std::filesystem::path root(c.out_dir);
  std::filesystem::create_directories(root);

  RunRecord rec;
  rec.kind = c.kind;
  rec.name = c.name;
  Writer w{root, &rec.files};
  {
    ExperimentConfig echo = c;
    echo.out_dir.clear();  // keeps run directories relocatable
    w.put("config.ini", format_config(echo));
  }

  auto finish_single = [&](const Prepared& p, const SingleOutput& o,
                           const std::string& dir) {
    rec.diagnostics.push_back(join_path(dir, "diagnostics.csv"));
    rec.notes.insert(rec.notes.end(), o.notes.begin(), o.notes.end());
    w.put(join_path(dir, "dataset.csv"), to_csv(p.data));
  };

  switch (c.kind) {
    case ExperimentKind::SingleRun:
    case ExperimentKind::Fig2: {
      const Prepared p = prepare(c, c.dataset.d);
      rec.datasets.push_back(summarize("main", p));
      const std::size_t b = c.batch_sizes.front();
      const auto total = c.total_iterations(b, p.data.size());
      auto o = run_single(c, p, b, resolve_eta(c, p, b), "",
                          single_snapshots(c, total));
      if (c.kind == ExperimentKind::Fig2)
        figure_plots(p, o, "", "B=" + std::to_string(b), o.files);
      else
        o.files["loss.svg"] = svg_line_plot(
            {"training loss", "t", "L(w(t))", true, true},
            {series_of("B=" + std::to_string(b), o.frames,
                       [](const DiagnosticsFrame& f) { return std::optional(f.loss); })});
      emit(w, o.files);
      finish_single(p, o, "");
      break;
    }
    case ExperimentKind::Fig4: {
      std::vector<Prepared> preps(c.dims.size());
      std::vector<SingleOutput> outs(c.dims.size());
      parallel_for(c.dims.size(), opt.threads, [&](std::size_t i) {
        preps[i] = prepare(c, c.dims[i]);
        const std::size_t b = c.batch_sizes.front();
        const auto total = c.total_iterations(b, preps[i].data.size());
        const std::string dir = "d" + std::to_string(c.dims[i]);
        outs[i] = run_single(c, preps[i], b, resolve_eta(c, preps[i], b), dir,
                             single_snapshots(c, total));
        figure_plots(preps[i], outs[i], dir, "d=" + std::to_string(c.dims[i]),
                     outs[i].files);
      });
      for (std::size_t i = 0; i < c.dims.size(); ++i) {
        const std::string dir = "d" + std::to_string(c.dims[i]);
        rec.datasets.push_back(summarize(dir, preps[i]));
        emit(w, outs[i].files);
        finish_single(preps[i], outs[i], dir);
      }
      break;
    }
    case ExperimentKind::ScalingSweep: {
      const Prepared p = prepare(c, c.dataset.d);
      rec.datasets.push_back(summarize("main", p));
      w.put("dataset.csv", to_csv(p.data));
      // eta proportional to B: the B = 1 value times B. Under a bound
      // policy the with-replacement bound is used, which is exactly linear.
      const double eta1 =
          c.eta.kind == EtaPolicy::Kind::Explicit
              ? c.eta.value
              : c.eta.value * max_lr_with_replacement(p.sol.gamma, p.loss.beta(),
                                                      p.sigma, 1);
      struct Job {
        std::size_t b;
        bool control;
      };
      std::vector<Job> jobs;
      for (auto b : c.batch_sizes) jobs.push_back({b, false});
      if (c.control)
        for (auto b : c.batch_sizes) jobs.push_back({b, true});
      for (const auto& j : jobs) batches_per_epoch(p.data.size(), j.b);
      std::vector<SingleOutput> outs(jobs.size());
      parallel_for(jobs.size(), opt.threads, [&](std::size_t i) {
        const auto b = jobs[i].b;
        SnapshotPolicy snaps;
        snaps.ratio = c.snapshot_ratio;
        snaps.unit = batches_per_epoch(p.data.size(), b);
        const double eta = jobs[i].control ? eta1 : eta1 * static_cast<double>(b);
        const std::string dir =
            std::string(jobs[i].control ? "control/" : "") + "B" + std::to_string(b);
        outs[i] = run_single(c, p, b, eta, dir, snaps);
      });
      auto table = [&](bool control, bool margin) {
        std::vector<std::size_t> bs;
        std::vector<std::vector<std::uint64_t>> eps;
        std::vector<std::vector<double>> vals;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
          if (jobs[i].control != control) continue;
          const auto k = batches_per_epoch(p.data.size(), jobs[i].b);
          bs.push_back(jobs[i].b);
          eps.emplace_back();
          vals.emplace_back();
          for (const auto& f : outs[i].frames) {
            if (f.t == 0) continue;
            eps.back().push_back(f.t / k);
            vals.back().push_back(margin ? f.margin_gap.value_or(std::nan(""))
                                         : f.loss);
          }
        }
        return epoch_table(bs, eps, vals);
      };
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        emit(w, outs[i].files);
        rec.notes.insert(rec.notes.end(), outs[i].notes.begin(), outs[i].notes.end());
        rec.diagnostics.push_back(
            join_path(std::string(jobs[i].control ? "control/" : "") + "B" +
                          std::to_string(jobs[i].b),
                      "diagnostics.csv"));
      }
      auto plots = [&](const EpochTable& t, const std::string& title,
                       const std::string& ylabel) {
        std::vector<PlotSeries> ss;
        for (std::size_t j = 0; j < t.batch_sizes.size(); ++j) {
          PlotSeries s{"B=" + std::to_string(t.batch_sizes[j]), {}, {}};
          for (std::size_t i = 0; i < t.epochs.size(); ++i) {
            s.x.push_back(static_cast<double>(t.epochs[i]));
            s.y.push_back(t.columns[j][i]);
          }
          ss.push_back(std::move(s));
        }
        return svg_line_plot({title, "epoch", ylabel, true, true}, ss);
      };
      const auto loss_t = table(false, false);
      const auto margin_t = table(false, true);
      w.put("loss_epochs.csv", epoch_table_csv(loss_t));
      w.put("margin_epochs.csv", epoch_table_csv(margin_t));
      w.put("sweep_loss.svg", plots(loss_t, "loss, eta proportional to B", "L"));
      w.put("sweep_margin.svg", plots(margin_t, "margin gap, eta proportional to B", "margin gap"));
      if (c.control) {
        const auto cl = table(true, false);
        const auto cm = table(true, true);
        w.put("control_loss_epochs.csv", epoch_table_csv(cl));
        w.put("control_margin_epochs.csv", epoch_table_csv(cm));
        w.put("control_loss.svg", plots(cl, "loss, fixed eta", "L"));
        w.put("control_margin.svg", plots(cm, "margin gap, fixed eta", "margin gap"));
      }
      break;
    }
    case ExperimentKind::BoundProbe: {
      const Prepared p = prepare(c, c.dataset.d);
      rec.datasets.push_back(summarize("main", p));
      w.put("dataset.csv", to_csv(p.data));
      std::vector<ProbeRow> rows;
      for (auto b : c.batch_sizes) {
        auto r = bound_probe(p.data, p.loss, b, c.mode, c.fractions,
                             c.total_iterations(b, p.data.size()), c.seed,
                             p.order, opt.threads);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      for (const auto& r : rows)
        if (r.diverged)
          rec.notes.push_back("B=" + std::to_string(r.batch_size) + " fraction " +
                              format_double(r.fraction) + ": diverged at t=" +
                              std::to_string(r.diverged_at));
      w.put("probe.csv", probe_csv(rows));
      break;
    }
  }

  // Verdicts come from the files just written, exactly as report() does.
  rec.verdicts = recompute_verdicts(
      c, [&](const std::string& rel) { return read_file(root / rel); });
  rec.files.push_back("record.txt");
  write_file_atomic(root / "record.txt", format_record(rec));
  return rec;
}

struct ReportResult {
  RunRecord record;
  std::vector<Verdict> verdicts;      // recomputed
  std::vector<std::string> problems;  // missing files, mismatches

  bool ok() const {
    return problems.empty() &&
           std::none_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) {
             return v.status == VerdictStatus::Fail;
           });
  }
};

/// Re-reads a run directory: checks that every listed file exists, that the
/// tables parse, and that recomputed verdicts match the recorded ones.
inline ReportResult report(const std::filesystem::path& run_dir) {
  ReportResult out;
  out.record = parse_record(read_file(run_dir / "record.txt"));
  for (const auto& f : out.record.files)
    if (!std::filesystem::exists(run_dir / f))
      out.problems.push_back("missing file " + f);
  for (const auto& f : out.record.diagnostics) {
    try {
      parse_diagnostics_csv(read_file(run_dir / f));
    } catch (const std::exception& e) {
      out.problems.push_back(f + ": " + e.what());
    }
  }
  const auto cfg = parse_config(read_file(run_dir / out.record.config_file));
  out.verdicts = recompute_verdicts(
      cfg, [&](const std::string& rel) { return read_file(run_dir / rel); });
  if (out.verdicts.size() != out.record.verdicts.size()) {
    out.problems.push_back("verdict count differs from the record");
  } else {
    for (std::size_t i = 0; i < out.verdicts.size(); ++i) {
      const auto& a = out.verdicts[i];
      const auto& b = out.record.verdicts[i];
      if (a.name != b.name || a.status != b.status)
        out.problems.push_back("verdict " + a.name + " differs from the record");
    }
  }
  return out;
}

}  // namespace septrack
