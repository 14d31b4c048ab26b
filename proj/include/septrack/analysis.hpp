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

/// @file analysis.hpp
/// Implicit-bias diagnostics along SGD trajectories: direction, angle and
/// margin gaps, the logarithmic residual and its limit w~, the harmonic
/// support-vector sum, validation loss, and rate fits.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "septrack/dataset.hpp"
#include "septrack/io.hpp"
#include "septrack/linalg.hpp"
#include "septrack/loss.hpp"
#include "septrack/sgd.hpp"
#include "septrack/svm.hpp"

namespace septrack {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kEulerGamma = 0.5772156649;

/// gamma - min_n x_n^T w / |w|.
inline double margin_gap(const Vector& w, const SvmSolution& sol,
                         const Dataset& data) {
  const double nw = norm(w);
  if (nw == 0.0) throw AnalysisError("margin_gap: w = 0");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < data.size(); ++n)
    m = std::min(m, dot(w, data.sample(n)));
  return 1.0 / norm(sol.w_hat) - m / nw;
}

/// 1 - cos(w, w_hat).
inline double angle_gap(const Vector& w, const Vector& w_hat) {
  const double a = norm(w), b = norm(w_hat);
  if (a == 0.0 || b == 0.0) throw AnalysisError("angle_gap: zero vector");
  return 1.0 - dot(w, w_hat) / (a * b);
}

/// | w/|w| - w_hat/|w_hat| |.
inline double direction_distance(const Vector& w, const Vector& w_hat) {
  const double a = norm(w), b = norm(w_hat);
  if (a == 0.0 || b == 0.0)
    throw AnalysisError("direction_distance: zero vector");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double diff = w[i] / a - w_hat[i] / b;
    s += diff * diff;
  }
  return std::sqrt(s);
}

/// log(eta t / (B K)), the time argument of the asymptote.
inline double log_time(std::uint64_t t, double eta, std::size_t b,
                       std::size_t k) {
  return std::log(eta * static_cast<double>(t) /
                  (static_cast<double>(b) * static_cast<double>(k)));
}

/// First t at which the asymptotic diagnostics are reported: ceil(2BK/eta).
inline std::uint64_t asymptotic_cutoff(double eta, std::size_t b,
                                       std::size_t k) {
  if (!(eta > 0.0)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(
      std::ceil(2.0 * static_cast<double>(b) * static_cast<double>(k) / eta));
}

/// w - w_hat log(eta t / (B K)).
inline Vector residual_rho(const Vector& w, std::uint64_t t, double eta,
                           std::size_t b, std::size_t k,
                           const SvmSolution& sol) {
  Vector r = w;
  axpy(-log_time(t, eta, b, k), sol.w_hat, r.span());
  return r;
}

/// w - w_hat log(eta t / (B K)) - w~.
inline Vector residual_r(const Vector& w, std::uint64_t t, double eta,
                         std::size_t b, std::size_t k, const SvmSolution& sol,
                         const Vector& w_tilde) {
  return residual_rho(w, t, eta, b, k, sol) - w_tilde;
}

struct WTilde {
  Vector w_tilde;
  double residual = 0.0;  // max_{n in S} |x_n^T w~ + log alpha_n|
  bool generic = false;
};

/// Solves x_n^T w~ = -log alpha_n on S with (I - P)(w~ - w0) = 0. Writing
/// w~ = (I - P) w0 + z with z in span(X_S) reduces this to the minimum-norm
/// least-squares solution of X_S^T z = -log alpha_S.
inline WTilde solve_w_tilde(const SvmSolution& sol, const Dataset& data,
                            const Vector& w0, double tol = 1e-8) {
  if (sol.support.empty()) throw AnalysisError("empty support set");
  if (w0.size() != data.dim()) throw AnalysisError("w0 dimension mismatch");
  const std::size_t s = sol.support.size();
  Matrix a(s, data.dim());
  Vector rhs(s);
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t n = sol.support[i];
    if (!(sol.alpha[n] > 0.0))
      throw AnalysisError("non-positive dual on support vector " +
                          std::to_string(n + 1));
    const auto x = data.sample(n);
    for (std::size_t j = 0; j < data.dim(); ++j) a(i, j) = x[j];
    rhs[i] = -std::log(sol.alpha[n]);
  }
  Vector z = least_squares(a, rhs);
  Vector off = w0 - sol.projector * w0;
  WTilde out;
  out.w_tilde = off + sol.projector * z;
  for (std::size_t i = 0; i < s; ++i) {
    const double e =
        std::abs(dot(out.w_tilde, data.sample(sol.support[i])) - rhs[i]);
    out.residual = std::max(out.residual, e);
  }
  out.generic = out.residual <= tol;
  return out;
}

/// K * sum_{u=1}^{t-1} (1/u) sum_{n in S and B(u)} alpha_n x_n, where
/// batch_log[u] is the batch used at step u (index 0 is ignored).
inline Vector sv_harmonic_sum(const std::vector<Batch>& batch_log,
                              const SvmSolution& sol, std::uint64_t t,
                              std::size_t k, const Dataset& data) {
  Vector out(data.dim(), 0.0);
  if (t <= 1) return out;
  if (batch_log.size() < t)
    throw AnalysisError("batch log shorter than t");
  std::vector<char> in_s(data.size(), 0);
  for (std::size_t n : sol.support) in_s[n] = 1;
  for (std::uint64_t u = 1; u < t; ++u) {
    const double wgt = static_cast<double>(k) / static_cast<double>(u);
    for (std::size_t n : batch_log[u])
      if (in_s[n]) axpy(wgt * sol.alpha[n], data.sample(n), out.span());
  }
  return out;
}

/// sum over the validation set of l(w^T x).
inline double validation_loss(const Vector& w, const Dataset& valset,
                              const LossSpec& loss) {
  if (valset.size() == 0) return 0.0;
  return empirical_loss(w, valset, loss);
}

// ---------------------------------------------------------------- fits

struct Series {
  std::vector<double> t;
  std::vector<double> y;

  std::size_t size() const noexcept { return t.size(); }
  void push(double ti, double yi) {
    t.push_back(ti);
    y.push_back(yi);
  }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope x + intercept.
inline LinearFit fit_linear(std::span<const double> x,
                            std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw AnalysisError("fit_linear needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw AnalysisError("fit_linear: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ssr += e * e;
  }
  const double scale = std::max(syy, my * my * n);
  f.r2 = (ssr <= 1e-28 * std::max(scale, 1e-300)) ? 1.0
         : syy > 0.0                              ? 1.0 - ssr / syy
                                                  : 0.0;
  return f;
}

struct PowerLawFit {
  double exponent = 0.0;
  double r2 = 0.0;
};

/// Slope of log y against log t.
inline PowerLawFit fit_power_law(const Series& s) {
  if (s.size() < 10) throw AnalysisError("fit_power_law needs >= 10 points");
  std::vector<double> lx(s.size()), ly(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.t[i] > 0.0) || !(s.y[i] > 0.0))
      throw AnalysisError("fit_power_law needs t > 0 and y > 0");
    lx[i] = std::log(s.t[i]);
    ly[i] = std::log(s.y[i]);
  }
  const auto f = fit_linear(lx, ly);
  return {f.slope, f.r2};
}

struct LogRateFit {
  double c = 0.0;
  double r2 = 0.0;
};

/// y = c / log t through the origin in 1/log t. r2 is the uncentered
/// coefficient of determination.
inline LogRateFit fit_log_rate(const Series& s) {
  if (s.size() < 10) throw AnalysisError("fit_log_rate needs >= 10 points");
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.t[i] > 1.0)) throw AnalysisError("fit_log_rate needs t > 1");
    const double x = 1.0 / std::log(s.t[i]);
    sxx += x * x;
    sxy += x * s.y[i];
    syy += s.y[i] * s.y[i];
  }
  LogRateFit f;
  f.c = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double e = s.y[i] - f.c / std::log(s.t[i]);
    ssr += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

/// Points whose log t lies in the final `fraction` of the series' log-time
/// span. Rate fits default to the final 60%.
inline Series log_tail(const Series& s, double fraction = 0.6) {
  Series out;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double t : s.t) {
    if (t > 0.0) {
      lo = std::min(lo, std::log(t));
      hi = std::max(hi, std::log(t));
    }
  }
  const double cut = hi - fraction * (hi - lo);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.t[i] > 0.0 && std::log(s.t[i]) >= cut - 1e-12)
      out.push(s.t[i], s.y[i]);
  return out;
}

/// Points with lo <= t <= hi.
inline Series window(const Series& s, double lo, double hi) {
  Series out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.t[i] >= lo && s.t[i] <= hi) out.push(s.t[i], s.y[i]);
  return out;
}

inline double series_max(const Series& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : s.y) m = std::max(m, v);
  return m;
}

/// Ratio of the maximum over the final decade (T/10, T] to the maximum over
/// the decade before it (T/100, T/10]. Used as the boundedness heuristic for
/// quantities that should stay O(1).
inline double decade_growth(const Series& s, double total) {
  const double late = series_max(window(s, total / 10.0 * (1 + 1e-12), total));
  const double mid =
      series_max(window(s, total / 100.0 * (1 + 1e-12), total / 10.0));
  if (!(mid > 0.0))
    return late <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return late / mid;
}

/// Ratio of the final-decade maximum to the maximum over the middle third
/// of log-time, [T^(1/3), T^(2/3)].
inline double mid_run_growth(const Series& s, double total) {
  const double late = series_max(window(s, total / 10.0 * (1 + 1e-12), total));
  const double mid =
      series_max(window(s, std::cbrt(total), std::cbrt(total * total)));
  if (!(mid > 0.0))
    return late <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return late / mid;
}

// ---------------------------------------------------------- diagnostics

struct DiagnosticsFrame {
  std::uint64_t t = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<double> dir_dist;
  std::optional<double> angle_gap;
  std::optional<double> margin_gap;
  std::optional<double> rho_norm;
  std::optional<double> r_norm;
  std::optional<double> val_loss;
  bool pre_asymptotic = true;
};

struct DiagnosticsInput {
  const Dataset* data = nullptr;
  const SvmSolution* sol = nullptr;
  const Vector* w_tilde = nullptr;  // optional
  const Dataset* valset = nullptr;  // optional
  LossSpec loss = logistic_loss();
};

inline std::vector<DiagnosticsFrame> compute_diagnostics(
    const Trajectory& tr, const DiagnosticsInput& in) {
  if (in.data == nullptr || in.sol == nullptr)
    throw AnalysisError("diagnostics need data and an SVM solution");
  const auto cutoff =
      asymptotic_cutoff(tr.eta, tr.batch_size, tr.batches_per_epoch);
  std::vector<DiagnosticsFrame> out;
  out.reserve(tr.snapshots.size());
  for (const auto& s : tr.snapshots) {
    DiagnosticsFrame f;
    f.t = s.t;
    f.loss = s.loss;
    f.grad_norm = s.grad_norm;
    if (norm(s.w) > 0.0) {
      f.dir_dist = direction_distance(s.w, in.sol->w_hat);
      f.angle_gap = angle_gap(s.w, in.sol->w_hat);
      f.margin_gap = margin_gap(s.w, *in.sol, *in.data);
    }
    f.pre_asymptotic = s.t < cutoff;
    if (!f.pre_asymptotic) {
      const Vector rho = residual_rho(s.w, s.t, tr.eta, tr.batch_size,
                                      tr.batches_per_epoch, *in.sol);
      f.rho_norm = norm(rho);
      if (in.w_tilde != nullptr) f.r_norm = norm(rho - *in.w_tilde);
    }
    if (in.valset != nullptr)
      f.val_loss = validation_loss(s.w, *in.valset, in.loss);
    out.push_back(f);
  }
  return out;
}

inline constexpr const char* kDiagnosticsHeader =
    "t,loss,grad_norm,dir_dist,angle_gap,margin_gap,rho_norm,r_norm,val_loss";

inline std::string diagnostics_csv(const std::vector<DiagnosticsFrame>& fr) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  std::string out = std::string(kDiagnosticsHeader) + '\n';
  for (const auto& f : fr) {
    out += std::to_string(f.t) + ',' + format_double(f.loss) + ',' +
           format_double(f.grad_norm) + ',' + opt(f.dir_dist) + ',' +
           opt(f.angle_gap) + ',' + opt(f.margin_gap) + ',' +
           opt(f.rho_norm) + ',' + opt(f.r_norm) + ',' + opt(f.val_loss) +
           '\n';
  }
  return out;
}

/// Parses a diagnostics CSV back into frames; empty fields become nullopt.
inline std::vector<DiagnosticsFrame> parse_diagnostics_csv(
    std::string_view text) {
  std::vector<DiagnosticsFrame> out;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kDiagnosticsHeader)
        throw ParseError("line 1: unexpected diagnostics header");
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 9)
      throw ParseError("line " + std::to_string(lineno) +
                       ": expected 9 fields, got " + std::to_string(f.size()));
    auto num = [&](std::string_view v) {
      double x = 0.0;
      if (!parse_double(v, x))
        throw ParseError("line " + std::to_string(lineno) +
                         ": bad number '" + std::string(v) + "'");
      return x;
    };
    auto opt = [&](std::string_view v) -> std::optional<double> {
      if (trim(v).empty()) return std::nullopt;
      return num(v);
    };
    DiagnosticsFrame d;
    if (!parse_u64(f[0], d.t))
      throw ParseError("line " + std::to_string(lineno) + ": bad t");
    d.loss = num(f[1]);
    d.grad_norm = num(f[2]);
    d.dir_dist = opt(f[3]);
    d.angle_gap = opt(f[4]);
    d.margin_gap = opt(f[5]);
    d.rho_norm = opt(f[6]);
    d.r_norm = opt(f[7]);
    d.val_loss = opt(f[8]);
    d.pre_asymptotic = !d.rho_norm.has_value();
    out.push_back(d);
  }
  return out;
}

/// Extracts (t, field) pairs where the field is present and t > 0.
inline Series column(const std::vector<DiagnosticsFrame>& frames,
                     const std::function<std::optional<double>(
                         const DiagnosticsFrame&)>& get) {
  Series s;
  for (const auto& f : frames) {
    if (f.t == 0) continue;
    if (auto v = get(f)) s.push(static_cast<double>(f.t), *v);
  }
  return s;
}

}  // namespace septrack
