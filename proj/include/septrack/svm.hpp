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

/// @file svm.hpp
/// Homogeneous hard-margin SVM: min |w|^2 s.t. w^T x_n >= 1, solved by dual
/// coordinate ascent with deterministic cyclic sweeps, then polished by an
/// exact solve of the Gram system on the detected support set.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "septrack/dataset.hpp"
#include "septrack/linalg.hpp"

namespace septrack {

class SvmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kSupportTol = 1e-4;

struct SvmSolution {
  Vector w_hat;                      // w_hat^T x_n >= 1
  double gamma = 0.0;                // 1 / |w_hat|
  std::vector<std::size_t> support;  // 0-based
  Vector alpha;                      // one per sample, zero off support
  double theta = std::numeric_limits<double>::infinity();
  Matrix projector;                  // onto span{x_n : n in support}
  bool spans_data = false;
  bool non_unique = false;           // singular Gram block on the support
  double kkt_violation = 0.0;
  std::size_t sweeps = 0;
};

/// Thrown when the sweep budget runs out; carries the last iterate.
class SvmNotConverged : public SvmError {
 public:
  SvmNotConverged(Vector w, Vector alpha, double violation)
      : SvmError("hard-margin solver did not converge (KKT violation " +
                 format_double(violation) + ")"),
        w_(std::move(w)),
        alpha_(std::move(alpha)),
        violation_(violation) {}
  const Vector& w() const noexcept { return w_; }
  const Vector& alpha() const noexcept { return alpha_; }
  double violation() const noexcept { return violation_; }

 private:
  Vector w_;
  Vector alpha_;
  double violation_;
};

namespace detail {

/// max_n of the KKT residual: |1 - m_n| on active duals, (1 - m_n)_+ else.
inline double kkt_violation(const Dataset& data, const Vector& w,
                            const Vector& alpha) {
  double v = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double g = 1.0 - dot(w, data.sample(n));
    v = std::max(v, alpha[n] > 0.0 ? std::abs(g) : std::max(0.0, g));
  }
  return v;
}

inline Vector combine(const Dataset& data, const Vector& alpha) {
  Vector w(data.dim(), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n)
    if (alpha[n] != 0.0) axpy(alpha[n], data.sample(n), w.span());
  return w;
}

/// Active-set refinement: solve G_S a = 1 on the candidate set, dropping
/// negative duals until all are nonnegative. Returns false when the Gram
/// block is singular.
inline bool polish(const Dataset& data, std::vector<std::size_t> cand,
                   Vector& alpha) {
  while (!cand.empty()) {
    const std::size_t s = cand.size();
    Matrix g(s, s);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = i; j < s; ++j)
        g(i, j) = g(j, i) = dot(data.sample(cand[i]), data.sample(cand[j]));
    Vector a;
    try {
      a = solve(g, Vector(s, 1.0), 1e-11);
    } catch (const LinalgError&) {
      return false;
    }
    std::size_t worst = s;
    for (std::size_t i = 0; i < s; ++i)
      if (a[i] < 0.0 && (worst == s || a[i] < a[worst])) worst = i;
    if (worst == s) {
      alpha = Vector(data.size(), 0.0);
      for (std::size_t i = 0; i < s; ++i) alpha[cand[i]] = a[i];
      return true;
    }
    cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  return false;
}

}  // namespace detail

/// Max-margin separator of separable data.
///
/// Sweeps n = 0..N-1 in order, each time maximizing the dual over alpha_n
/// alone; stops once the largest KKT residual is below tol. The support set
/// is every sample with margin <= 1 + support_tol (ties included). If the
/// Gram matrix of the support set is nonsingular the duals are recomputed
/// exactly from it; otherwise the coordinate-ascent duals are kept and
/// non_unique is set.
inline SvmSolution solve_hard_margin(const Dataset& data, double tol = 1e-10,
                                     std::size_t max_iters = 2000000,
                                     double support_tol = kSupportTol) {
  if (!is_separable(data).separable) throw SvmError("not separable");
  const std::size_t n = data.size();
  std::vector<double> sq(n);
  for (std::size_t j = 0; j < n; ++j) sq[j] = norm_sq(data.sample(j));

  Vector alpha(n, 0.0);
  Vector w(data.dim(), 0.0);
  double viol = std::numeric_limits<double>::infinity();
  std::size_t sweep = 0;
  for (; sweep < max_iters; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g = 1.0 - dot(w, data.sample(j));
      const double delta = std::max(-alpha[j], g / sq[j]);
      if (delta == 0.0) continue;
      alpha[j] += delta;
      axpy(delta, data.sample(j), w.span());
    }
    // Recombine periodically to shed drift in w.
    if (sweep % 64 == 63) w = detail::combine(data, alpha);
    viol = detail::kkt_violation(data, w, alpha);
    if (viol < tol) break;
  }
  if (!(viol < tol)) throw SvmNotConverged(w, alpha, viol);

  SvmSolution sol;
  sol.sweeps = sweep + 1;

  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < n; ++j)
    if (alpha[j] > 0.0) cand.push_back(j);
  Vector polished;
  if (detail::polish(data, cand, polished)) {
    const Vector wp = detail::combine(data, polished);
    const double vp = detail::kkt_violation(data, wp, polished);
    if (vp <= viol) {
      alpha = polished;
      w = wp;
      viol = vp;
    }
  } else {
    sol.non_unique = true;
  }

  sol.alpha = alpha;
  sol.w_hat = w;
  sol.gamma = 1.0 / norm(w);
  sol.kkt_violation = viol;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = dot(w, data.sample(j));
    if (m <= 1.0 + support_tol) sol.support.push_back(j);
    else sol.theta = std::min(sol.theta, m);
  }
  const Matrix xs = data.matrix().select_columns(sol.support);
  sol.projector = orthogonal_projector(xs);
  sol.spans_data = numeric_rank(xs) == numeric_rank(data.matrix());
  if (!sol.non_unique) {
    // Duplicated or dependent support vectors leave the duals non-unique.
    sol.non_unique = numeric_rank(xs) < sol.support.size();
  }
  return sol;
}

/// rank(X_S) == rank(X) at the given relative tolerance.
inline bool spans_check(const SvmSolution& sol, const Dataset& data,
                        double tol = kProjectorTol) {
  const Matrix xs = data.matrix().select_columns(sol.support);
  return numeric_rank(xs, tol) == numeric_rank(data.matrix(), tol);
}

/// Grid approximation of max over unit w of min_n w^T x_n, for d <= 3.
/// d = 2 sweeps `resolution` angles; d = 3 uses a sqrt(resolution) by
/// sqrt(resolution) latitude-longitude grid. Non-separable data yields a
/// value <= 0.
inline double brute_force_margin(const Dataset& data, std::size_t resolution) {
  const std::size_t d = data.dim();
  if (d > 3) throw SvmError("brute_force_margin supports d <= 3");
  if (resolution < 1) throw SvmError("resolution must be positive");
  auto min_margin = [&](std::span<const double> w) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < data.size(); ++j)
      m = std::min(m, dot(w, data.sample(j)));
    return m;
  };
  double best = -std::numeric_limits<double>::infinity();
  if (d == 1) {
    for (double s : {1.0, -1.0}) {
      const double w[1] = {s};
      best = std::max(best, min_margin(w));
    }
    return best;
  }
  const double two_pi = 2.0 * std::numbers::pi;
  if (d == 2) {
    for (std::size_t k = 0; k < resolution; ++k) {
      const double phi = two_pi * static_cast<double>(k) /
                         static_cast<double>(resolution);
      const double w[2] = {std::cos(phi), std::sin(phi)};
      best = std::max(best, min_margin(w));
    }
    return best;
  }
  const auto per_axis = static_cast<std::size_t>(
      std::max(4.0, std::ceil(std::sqrt(static_cast<double>(resolution)))));
  for (std::size_t a = 0; a <= per_axis; ++a) {
    const double theta = std::numbers::pi * static_cast<double>(a) /
                         static_cast<double>(per_axis);
    for (std::size_t b = 0; b < 2 * per_axis; ++b) {
      const double phi = std::numbers::pi * static_cast<double>(b) /
                         static_cast<double>(per_axis);
      const double w[3] = {std::sin(theta) * std::cos(phi),
                           std::sin(theta) * std::sin(phi), std::cos(theta)};
      best = std::max(best, min_margin(w));
    }
  }
  return best;
}

}  // namespace septrack
