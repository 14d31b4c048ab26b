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

/// @file sgd.hpp
/// Fixed-learning-rate minibatch SGD on the empirical loss
///
///     L(w) = sum_n l(w^T x_n),
///     w(t+1) = w(t) - (eta / B) * sum_{n in B(t)} l'(w(t)^T x_n) x_n,
///
/// together with the learning-rate bounds under which the loss provably
/// vanishes, trajectory recording, and checks of the within-epoch drift
/// bounds that drive the without-replacement analysis.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "septrack/dataset.hpp"
#include "septrack/io.hpp"
#include "septrack/linalg.hpp"
#include "septrack/loss.hpp"
#include "septrack/sampler.hpp"

namespace septrack {

class SgdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite iterate; usually a learning rate far above the bound.
class Divergence : public SgdError {
 public:
  explicit Divergence(std::uint64_t t)
      : SgdError("non-finite iterate at t=" + std::to_string(t)), t_(t) {}
  std::uint64_t t() const noexcept { return t_; }

 private:
  std::uint64_t t_;
};

namespace detail {

/// In-place update; returns |w_new - w_old|^2. grad is scratch of size d.
inline double step_inplace(Vector& w, std::span<const std::size_t> batch,
                           const Dataset& data, const LossSpec& loss,
                           double eta, std::size_t b, Vector& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t n : batch) {
    const auto x = data.sample(n);
    const double c = loss.derivative(dot(w, x));
    axpy(c, x, grad.span());
  }
  const double scale = eta / static_cast<double>(b);
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double delta = scale * grad[i];
    w[i] -= delta;
    sq += delta * delta;
  }
  return sq;
}

}  // namespace detail

/// One update of the minibatch recursion. Throws Divergence on a
/// non-finite result; t is only used in the message.
inline Vector step(const Vector& w, std::span<const std::size_t> batch,
                   const Dataset& data, const LossSpec& loss, double eta,
                   std::size_t b, std::uint64_t t = 0) {
  if (batch.size() != b) throw SgdError("batch size does not match B");
  Vector out = w;
  Vector grad(w.size());
  detail::step_inplace(out, batch, data, loss, eta, b, grad);
  if (!all_finite(out)) throw Divergence(t);
  return out;
}

/// Gradient of L: sum_n l'(w^T x_n) x_n.
inline Vector full_gradient(const Vector& w, const Dataset& data,
                            const LossSpec& loss) {
  Vector g(data.dim(), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto x = data.sample(n);
    axpy(loss.derivative(dot(w, x)), x, g.span());
  }
  return g;
}

/// Neumaier-compensated sum of l(w^T x_n).
inline double empirical_loss(const Vector& w, const Dataset& data,
                             const LossSpec& loss) {
  double sum = 0.0, comp = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const double v = loss.value(dot(w, data.sample(n)));
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Strict upper bound on eta for uniformly sampled minibatches:
/// B * 2 gamma^2 / (beta sigma^2). Exactly linear in B.
inline double max_lr_with_replacement(double gamma, double beta,
                                      double sigma_max, std::size_t b) {
  if (gamma == 0.0) return 0.0;
  return static_cast<double>(b) * 2.0 * gamma * gamma /
         (beta * sigma_max * sigma_max);
}

/// Strict upper bound on eta when every epoch partitions the data:
/// B * min(1 / (2 K beta sigma^2), gamma / (2 beta sigma^3 (K + sigma/gamma))).
inline double max_lr_without_replacement(double gamma, double beta,
                                         double sigma_max, std::size_t b,
                                         std::size_t k) {
  if (k == 0) throw SgdError("K must be >= 1");
  if (gamma == 0.0) return 0.0;
  const double kk = static_cast<double>(k);
  const double s2 = sigma_max * sigma_max;
  const double first = 1.0 / (2.0 * kk * beta * s2);
  const double second =
      gamma / (2.0 * beta * s2 * sigma_max * (kk + sigma_max / gamma));
  return static_cast<double>(b) * std::min(first, second);
}

/// The bound that applies to a sampling mode: the with-replacement bound
/// for uniform sampling, the partition bound otherwise.
inline double learning_rate_bound(SamplingMode mode, double gamma, double beta,
                                  double sigma_max, std::size_t b,
                                  std::size_t k) {
  return mode == SamplingMode::WithReplacement
             ? max_lr_with_replacement(gamma, beta, sigma_max, b)
             : max_lr_without_replacement(gamma, beta, sigma_max, b, k);
}

/// Snapshot times: t = unit * round(ratio^j) for j = 0, 1, ... (deduplicated),
/// plus t = 0 and the final t = T. unit = K gives epoch-aligned snapshots.
struct SnapshotPolicy {
  double ratio = 1.1;
  std::uint64_t unit = 1;
  std::vector<std::uint64_t> extra;  // additional times, clipped to [1, T]
};

inline std::vector<std::uint64_t> snapshot_times(const SnapshotPolicy& p,
                                                 std::uint64_t total) {
  if (!(p.ratio > 1.0)) throw SgdError("snapshot ratio must exceed 1");
  if (p.unit == 0) throw SgdError("snapshot unit must be positive");
  std::vector<std::uint64_t> out{0};
  double g = 1.0;
  for (;;) {
    const auto t = p.unit * static_cast<std::uint64_t>(std::llround(g));
    if (t >= total) break;
    if (t > out.back()) out.push_back(t);
    g *= p.ratio;
  }
  if (total > 0) out.push_back(total);
  for (auto t : p.extra)
    if (t >= 1 && t <= total) out.push_back(t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct SgdConfig {
  double eta = 0.0;
  std::size_t batch_size = 1;
  std::uint64_t iterations = 1;  // T
  SamplingMode mode = SamplingMode::WithReplacement;
  std::uint64_t seed = 1;
  Vector w0;  // empty means zeros
  LossSpec loss = logistic_loss();
  SnapshotPolicy snapshots;
  std::vector<Batch> custom_order;
  bool record_batches = false;
};

struct Snapshot {
  std::uint64_t t = 0;
  Vector w;
  double loss = 0.0;
  double grad_norm = 0.0;
  double sumsq_steps = 0.0;  // sum_{u < t} |w(u+1) - w(u)|^2
};

struct Trajectory {
  std::vector<Snapshot> snapshots;  // t strictly increasing, starts at 0
  double eta = 0.0;
  std::size_t batch_size = 1;
  std::size_t batches_per_epoch = 1;
  std::uint64_t iterations = 0;
  SamplingMode mode = SamplingMode::WithReplacement;
  std::uint64_t seed = 0;
  std::uint64_t dataset_fingerprint = 0;
  bool diverged = false;
  std::uint64_t diverged_at = 0;
  std::vector<std::string> warnings;
  std::vector<Batch> batches;  // batches[u] = B(u), if recorded

  const Snapshot& initial() const { return snapshots.front(); }
  const Snapshot& final() const { return snapshots.back(); }
};

/// Runs T steps, recording snapshots on the configured schedule. A
/// non-finite iterate ends the run early with diverged set; the snapshots
/// recorded so far are kept.
inline Trajectory run(const SgdConfig& cfg, const Dataset& data) {
  if (!(cfg.eta >= 0.0) || !std::isfinite(cfg.eta))
    throw SgdError("eta must be finite and >= 0");
  if (cfg.iterations < 1) throw SgdError("T must be >= 1");
  const std::size_t d = data.dim();
  Vector w = cfg.w0.empty() ? Vector(d, 0.0) : cfg.w0;
  if (w.size() != d) throw SgdError("w0 has the wrong dimension");

  Schedule schedule(cfg.mode, data.size(), cfg.batch_size, cfg.seed,
                    cfg.custom_order);
  Trajectory tr;
  tr.eta = cfg.eta;
  tr.batch_size = cfg.batch_size;
  tr.batches_per_epoch = schedule.batches_per_epoch();
  tr.iterations = cfg.iterations;
  tr.mode = cfg.mode;
  tr.seed = cfg.seed;
  tr.dataset_fingerprint = data.fingerprint();
  if (!is_separable(data).separable)
    tr.warnings.push_back("dataset is not separable");

  const auto times = snapshot_times(cfg.snapshots, cfg.iterations);
  std::size_t next = 0;
  double sumsq = 0.0;
  auto record = [&](std::uint64_t t) {
    Snapshot s;
    s.t = t;
    s.w = w;
    s.loss = empirical_loss(w, data, cfg.loss);
    s.grad_norm = norm(full_gradient(w, data, cfg.loss));
    s.sumsq_steps = sumsq;
    tr.snapshots.push_back(std::move(s));
  };
  record(0);
  ++next;

  Batch batch;
  Vector grad(d);
  for (std::uint64_t t = 0; t < cfg.iterations; ++t) {
    schedule.next_batch_into(batch);
    if (cfg.record_batches) tr.batches.push_back(batch);
    const double sq =
        detail::step_inplace(w, batch, data, cfg.loss, cfg.eta,
                             cfg.batch_size, grad);
    if (!std::isfinite(sq) || !all_finite(w)) {
      tr.diverged = true;
      tr.diverged_at = t + 1;
      return tr;
    }
    sumsq += sq;
    if (next < times.size() && times[next] == t + 1) {
      record(t + 1);
      if (!std::isfinite(tr.snapshots.back().loss)) {
        tr.snapshots.pop_back();
        tr.diverged = true;
        tr.diverged_at = t + 1;
        return tr;
      }
      ++next;
    }
  }
  return tr;
}

/// CSV with header t,loss,grad_norm,w_norm,sumsq_steps.
inline std::string trajectory_csv(const Trajectory& tr) {
  std::string out = "t,loss,grad_norm,w_norm,sumsq_steps\n";
  for (const auto& s : tr.snapshots) {
    out += std::to_string(s.t) + ',' + format_double(s.loss) + ',' +
           format_double(s.grad_norm) + ',' + format_double(norm(s.w)) + ',' +
           format_double(s.sumsq_steps) + '\n';
  }
  return out;
}

/// One line per snapshot: t then the d weights, comma separated.
inline std::string weights_csv(const Trajectory& tr) {
  std::string out;
  for (const auto& s : tr.snapshots) {
    out += std::to_string(s.t);
    for (double v : s.w) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

/// Largest observed ratio of left to right side for each within-epoch drift
/// bound, over k = 0..K. All three bounds hold when every ratio is <= 1.
struct EpochDriftCheck {
  double linearization = 0.0;  // |w(t+k) - w(t) + (eta/B) g_k(t)|
  double displacement = 0.0;   // |w(t+k) - w(t)|
  double gradient = 0.0;       // |grad L(w(t+k)) - grad L(w(t))|

  bool holds(double slack = 1e-12) const {
    return linearization <= 1.0 + slack && displacement <= 1.0 + slack &&
           gradient <= 1.0 + slack;
  }
};

/// Replays one epoch from w_start with the given K batches and compares the
/// drift to its bounds, with step size s = eta / B:
///
///   |w(t+k) - w(t) + s g_k|      <= s^2 k beta sigma^3 / gamma / (1 - s k beta sigma^2) |grad L(w(t))|
///   |w(t+k) - w(t)|              <= s sigma / gamma / (1 - s k beta sigma^2) |grad L(w(t))|
///   |grad L(w(t+k)) - grad L(w(t))| <= s beta sigma^2 / gamma / (1 - s k beta sigma^2) |grad L(w(t))|
///
/// where g_k is the gradient over the first k batches evaluated at w(t); at
/// k = K it is the full gradient.
inline EpochDriftCheck check_epoch_drift(const Vector& w_start,
                                         const std::vector<Batch>& epoch,
                                         const Dataset& data,
                                         const LossSpec& loss, double eta,
                                         std::size_t b, double gamma,
                                         double sigma_max) {
  EpochDriftCheck out;
  const double s = eta / static_cast<double>(b);
  const double beta = loss.beta();
  const double s2 = sigma_max * sigma_max;
  const Vector g0 = full_gradient(w_start, data, loss);
  const double g0n = norm(g0);
  Vector w = w_start;
  Vector partial(data.dim(), 0.0);  // g_k at w(t)
  Vector scratch(data.dim());
  auto ratio = [](double lhs, double rhs) {
    if (lhs == 0.0) return 0.0;
    return rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
  };
  for (std::size_t k = 0; k <= epoch.size(); ++k) {
    if (k > 0) {
      for (std::size_t n : epoch[k - 1]) {
        const auto x = data.sample(n);
        axpy(loss.derivative(dot(w_start, x)), x, partial.span());
      }
      detail::step_inplace(w, epoch[k - 1], data, loss, eta, b, scratch);
    }
    const double kk = static_cast<double>(k);
    const double denom = 1.0 - s * kk * beta * s2;
    if (!(denom > 0.0)) {
      out.linearization = out.displacement = out.gradient =
          std::numeric_limits<double>::infinity();
      return out;
    }
    Vector dw = w - w_start;
    Vector lin = dw;
    axpy(s, partial, lin.span());
    const Vector dg = full_gradient(w, data, loss) - g0;
    out.linearization = std::max(
        out.linearization,
        ratio(norm(lin), s * s * kk * beta * s2 * sigma_max / gamma / denom * g0n));
    out.displacement = std::max(
        out.displacement, ratio(norm(dw), s * sigma_max / gamma / denom * g0n));
    out.gradient = std::max(
        out.gradient, ratio(norm(dg), s * beta * s2 / gamma / denom * g0n));
  }
  return out;
}

}  // namespace septrack
