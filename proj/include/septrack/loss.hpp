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

/// @file loss.hpp
/// Monotone classification losses: value, derivative, the Lipschitz constant
/// of the derivative (beta), and optional exponential-tail constants.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "septrack/linalg.hpp"

namespace septrack {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LossKind { Logistic, Exponential, Custom };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::Logistic: return "logistic";
    case LossKind::Exponential: return "exponential";
    case LossKind::Custom: return "custom";
  }
  return "?";
}

/// Constants of a tight exponential tail: for u > u_bar,
/// (1 - e^{-mu_minus u}) e^{-u} <= -l'(u) <= (1 + e^{-mu_plus u}) e^{-u}.
struct TailConstants {
  double mu_plus = 1.0;
  double mu_minus = 1.0;
  double u_bar = 0.0;
};

namespace detail {

// Both branches switch at |u| = 30 where exp(-|u|) is below double epsilon
// relative to 1.
inline double logistic_value(double u) noexcept {
  if (u < -30.0) return -u + std::exp(u);
  return std::log1p(std::exp(-u));
}

inline double logistic_derivative(double u) noexcept {
  if (u > 0.0) {
    const double e = std::exp(-u);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(u));
}

}  // namespace detail

/// A loss l(u) of the margin u, positive and strictly decreasing to zero.
/// Logistic and exponential losses dispatch to inline closed forms; custom
/// losses go through the stored callables.
class LossSpec {
 public:
  using Fn = std::function<double(double)>;

  LossKind kind() const noexcept { return kind_; }
  double beta() const noexcept { return beta_; }
  const std::optional<TailConstants>& tail() const noexcept { return tail_; }

  double value(double u) const {
    switch (kind_) {
      case LossKind::Logistic: return detail::logistic_value(u);
      case LossKind::Exponential: return std::exp(-u);
      case LossKind::Custom: return value_(u);
    }
    return 0.0;
  }

  double derivative(double u) const {
    switch (kind_) {
      case LossKind::Logistic: return detail::logistic_derivative(u);
      case LossKind::Exponential: return -std::exp(-u);
      case LossKind::Custom: return derivative_(u);
    }
    return 0.0;
  }

  friend LossSpec logistic_loss();
  friend LossSpec exponential_loss();
  friend LossSpec custom_loss(Fn, Fn, double, std::optional<TailConstants>);

 private:
  LossKind kind_ = LossKind::Logistic;
  Fn value_;
  Fn derivative_;
  double beta_ = 0.25;
  std::optional<TailConstants> tail_;
};

/// l(u) = log(1 + e^{-u}); beta = sup l'' = 1/4 at u = 0.
inline LossSpec logistic_loss() {
  LossSpec s;
  s.kind_ = LossKind::Logistic;
  s.beta_ = 0.25;
  s.tail_ = TailConstants{1.0, 1.0, 0.0};
  return s;
}

/// l(u) = e^{-u}. Its derivative is not globally Lipschitz, so beta is
/// infinite and every learning-rate bound built from it is zero.
inline LossSpec exponential_loss() {
  LossSpec s;
  s.kind_ = LossKind::Exponential;
  s.beta_ = std::numeric_limits<double>::infinity();
  s.tail_ = TailConstants{1.0, 1.0, 0.0};
  return s;
}

namespace detail {

inline constexpr double kGridLo = -20.0;
inline constexpr double kGridHi = 20.0;
inline constexpr int kGridPoints = 4001;

/// Largest slope of l' between neighbouring points of a uniform grid.
inline double sampled_derivative_lipschitz(const LossSpec::Fn& dl) {
  const double h = (kGridHi - kGridLo) / (kGridPoints - 1);
  double best = 0.0;
  double prev = dl(kGridLo);
  for (int i = 1; i < kGridPoints; ++i) {
    const double cur = dl(kGridLo + i * h);
    best = std::max(best, std::abs(cur - prev) / h);
    prev = cur;
  }
  return best;
}

}  // namespace detail

/// Wraps user callables as a loss. The declared beta is cross-checked on a
/// grid over [-20, 20]; a sampled slope of l' above 1.01 * beta is rejected,
/// as is any grid point with l <= 0, l' >= 0 or l increasing.
inline LossSpec custom_loss(LossSpec::Fn value, LossSpec::Fn derivative,
                            double beta,
                            std::optional<TailConstants> tail = std::nullopt) {
  if (!value || !derivative) throw LossError("custom loss needs l and l'");
  if (!(beta >= 0.0)) throw LossError("custom loss: beta must be >= 0");
  const double h = (detail::kGridHi - detail::kGridLo) /
                   (detail::kGridPoints - 1);
  double prev = value(detail::kGridLo);
  for (int i = 0; i < detail::kGridPoints; ++i) {
    const double u = detail::kGridLo + i * h;
    const double l = value(u);
    const double dl = derivative(u);
    if (!(l > 0.0) || !(dl < 0.0) || !std::isfinite(l))
      throw LossError("custom loss: need l > 0 and l' < 0 at u = " +
                      std::to_string(u));
    if (i > 0 && l > prev)
      throw LossError("custom loss: not decreasing near u = " +
                      std::to_string(u));
    prev = l;
  }
  const double sampled = detail::sampled_derivative_lipschitz(derivative);
  if (sampled > 1.01 * beta)
    throw LossError("custom loss: declared beta " + std::to_string(beta) +
                    " below sampled Lipschitz constant " +
                    std::to_string(sampled));
  LossSpec s;
  s.kind_ = LossKind::Custom;
  s.value_ = std::move(value);
  s.derivative_ = std::move(derivative);
  s.beta_ = beta;
  s.tail_ = tail;
  return s;
}

/// Checks the tight-exponential-tail sandwich of -l' at every grid point.
inline bool verify_tight_tail(const LossSpec& spec,
                              std::span<const double> grid) {
  if (!spec.tail()) throw LossError("no tail constants declared");
  const auto& t = *spec.tail();
  for (double u : grid)
    if (!(u > t.u_bar))
      throw LossError("tail grid point " + std::to_string(u) +
                      " not above u_bar");
  for (double u : grid) {
    const double f = -spec.derivative(u);
    const double e = std::exp(-u);
    // A few ulps of slack: the sandwich gap shrinks below double precision
    // once e^{-mu u} < epsilon.
    constexpr double slack = 8.0 * std::numeric_limits<double>::epsilon();
    const double lo = (1.0 - std::exp(-t.mu_minus * u)) * e * (1.0 - slack);
    const double hi = (1.0 + std::exp(-t.mu_plus * u)) * e * (1.0 + slack);
    if (f < lo || f > hi) return false;
  }
  return true;
}

/// Smoothness constant beta * sigma_max^2 of the empirical loss over x.
inline double empirical_smoothness(const LossSpec& spec, const Matrix& x) {
  if (spec.beta() == 0.0) return 0.0;
  const double s = spectral_norm(x);
  return spec.beta() * s * s;
}

}  // namespace septrack
