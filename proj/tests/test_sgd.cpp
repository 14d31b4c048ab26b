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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "septrack/dataset.hpp"
#include "septrack/sgd.hpp"
#include "septrack/svm.hpp"

namespace septrack {
namespace {

Dataset columns(const std::vector<Vector>& c) {
  return Dataset(Matrix::from_columns(c));
}

const std::vector<Batch> kAdversarial = {{0, 1}, {2, 3}, {4, 5}, {6, 7},
                                         {7, 6}, {5, 4}, {3, 0}, {2, 1}};

// Config at `fraction` of the bound matching the mode.
SgdConfig at_bound(const Dataset& ds, SamplingMode mode, std::size_t b,
                   double fraction, std::uint64_t total) {
  const auto sol = solve_hard_margin(ds);
  const double sigma = spectral_norm(ds.matrix());
  SgdConfig c;
  c.batch_size = b;
  c.mode = mode;
  c.iterations = total;
  c.seed = 3;
  c.eta = fraction * learning_rate_bound(mode, sol.gamma, 0.25, sigma, b,
                                         batches_per_epoch(ds.size(), b));
  if (mode == SamplingMode::Custom) c.custom_order = kAdversarial;
  return c;
}

const Snapshot& at(const Trajectory& tr, std::uint64_t t) {
  for (const auto& s : tr.snapshots)
    if (s.t == t) return s;
  throw std::runtime_error("no snapshot at t=" + std::to_string(t));
}

TEST(Step, Examples) {
  const auto l = logistic_loss();
  const auto one = columns({{1, 0}});
  const Batch b0{0};
  EXPECT_EQ(step(Vector{0, 0}, b0, one, l, 1.0, 1), (Vector{0.5, 0}));
  EXPECT_EQ(step(Vector{0.3, -2}, b0, one, l, 0.0, 1), (Vector{0.3, -2}));
  const auto two = columns({{1, 1}, {1, -1}});
  const Batch b01{0, 1};
  EXPECT_EQ(step(Vector{0, 0}, b01, two, l, 1.0, 2), (Vector{0.5, 0}));
  EXPECT_THROW(step(Vector{0, 0}, b01, two, l, 1.0, 1), SgdError);
}

TEST(Step, OverflowReportsIteration) {
  const auto e = exponential_loss();
  const auto one = columns({{1, 0}});
  const Batch b0{0};
  try {
    step(Vector{-800, 0}, b0, one, e, 1.0, 1, 42);
    FAIL();
  } catch (const Divergence& d) {
    EXPECT_EQ(d.t(), 42u);
  }
}

TEST(FullGradient, Examples) {
  const auto l = logistic_loss();
  const auto two = columns({{1, 1}, {1, -1}});
  EXPECT_EQ(full_gradient(Vector{0, 0}, two, l), (Vector{-1, 0}));
  const Vector far = full_gradient(Vector{1000, 0}, two, l);
  EXPECT_TRUE(all_finite(far));
  EXPECT_LT(norm(far), 1e-300);
  const auto one = columns({{3, -4}});
  EXPECT_EQ(full_gradient(Vector{0, 0}, one, l), (Vector{-1.5, 2}));
}

TEST(GdConsistency, FullBatchStepMatchesGradient) {
  const auto ds = synthesize(3, 12, 1.0, 0.5, 2);
  const auto l = logistic_loss();
  Batch all(12);
  for (std::size_t i = 0; i < 12; ++i) all[i] = i;
  const Vector w{0.3, -0.2, 1.1};
  const double eta = 0.7;
  const Vector a = step(w, all, ds, l, eta, 12);
  const Vector b = w - (eta / 12.0) * full_gradient(w, ds, l);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(a[i], b[i], 4.0 * std::numeric_limits<double>::epsilon() *
                                (1.0 + std::abs(b[i])));
}

TEST(EmpiricalLoss, LogTwoPerSampleAtZero) {
  const auto ds = synthesize(2, 10, 1.0, 0.5, 1);
  EXPECT_NEAR(empirical_loss(Vector{0, 0}, ds, logistic_loss()),
              10.0 * std::numbers::ln2, 1e-14);
}

TEST(LearningRate, WithReplacementExamples) {
  EXPECT_DOUBLE_EQ(max_lr_with_replacement(1.0, 0.25, std::numbers::sqrt2, 1), 4.0);
  EXPECT_DOUBLE_EQ(max_lr_with_replacement(1.0, 0.25, std::numbers::sqrt2, 8), 32.0);
  EXPECT_EQ(max_lr_with_replacement(0.0, 0.25, std::numbers::sqrt2, 1), 0.0);
}

TEST(LearningRate, WithoutReplacementExamples) {
  EXPECT_NEAR(max_lr_without_replacement(1.0, 0.25, std::numbers::sqrt2, 1, 2),
              0.20710678118654754, 1e-15);
  const double r = max_lr_without_replacement(1.0, 0.25, 2.0, 1, 100) /
                   max_lr_without_replacement(1.0, 0.25, 2.0, 1, 200);
  EXPECT_NEAR(r, 2.0, 0.02);
  EXPECT_THROW(max_lr_without_replacement(1.0, 0.25, 1.0, 1, 0), SgdError);
}

TEST(LearningRate, PartitionBoundBelowUniformBound) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = synthesize(2, 64, 1.0, 0.5, seed);
    const double g = solve_hard_margin(ds).gamma;
    const double s = spectral_norm(ds.matrix());
    for (std::size_t b : {1, 2, 4, 8, 16, 32, 64}) {
      const std::size_t k = 64 / b;
      EXPECT_LT(max_lr_without_replacement(g, 0.25, s, b, k),
                max_lr_with_replacement(g, 0.25, s, b));
    }
  }
}

TEST(LearningRate, ExponentialLossHasNoBound) {
  EXPECT_EQ(max_lr_with_replacement(1.0, exponential_loss().beta(), 1.0, 4), 0.0);
}

TEST(Snapshots, GeometricTimes) {
  SnapshotPolicy p;
  p.ratio = 2.0;
  EXPECT_EQ(snapshot_times(p, 20),
            (std::vector<std::uint64_t>{0, 1, 2, 4, 8, 16, 20}));
  p.unit = 4;
  p.extra = {3, 100};
  EXPECT_EQ(snapshot_times(p, 20),
            (std::vector<std::uint64_t>{0, 3, 4, 8, 16, 20}));
  p.ratio = 1.0;
  EXPECT_THROW(snapshot_times(p, 20), SgdError);
}

TEST(Run, SingleStepMatchesStep) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  for (auto mode : {SamplingMode::WithReplacement, SamplingMode::RoundRobin}) {
    SgdConfig c;
    c.eta = 0.3;
    c.batch_size = 2;
    c.iterations = 1;
    c.mode = mode;
    c.w0 = Vector{0.1, 0.2};
    c.record_batches = true;
    const auto tr = run(c, ds);
    ASSERT_EQ(tr.snapshots.size(), 2u);
    EXPECT_EQ(tr.final().w, step(c.w0, tr.batches[0], ds, c.loss, 0.3, 2));
    EXPECT_EQ(tr.final().sumsq_steps, norm_sq(tr.final().w - c.w0));
  }
}

TEST(Run, Deterministic) {
  const auto ds = synthesize(2, 16, 1.0, 0.5, 2);
  for (auto mode : {SamplingMode::WithReplacement, SamplingMode::ShuffleEachEpoch}) {
    auto c = at_bound(ds, mode, 4, 0.5, 5000);
    const auto a = run(c, ds), b = run(c, ds);
    EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
    EXPECT_EQ(weights_csv(a), weights_csv(b));
    c.seed = 4;
    EXPECT_NE(weights_csv(run(c, ds)), weights_csv(a));
  }
}

TEST(Run, RecordsTrajectoryMetadata) {
  const auto ds = synthesize(2, 16, 1.0, 0.5, 2);
  auto c = at_bound(ds, SamplingMode::RoundRobin, 4, 0.5, 1000);
  const auto tr = run(c, ds);
  EXPECT_EQ(tr.batches_per_epoch, 4u);
  EXPECT_EQ(tr.dataset_fingerprint, ds.fingerprint());
  EXPECT_EQ(tr.initial().t, 0u);
  EXPECT_EQ(tr.final().t, 1000u);
  EXPECT_FALSE(tr.diverged);
  for (std::size_t i = 1; i < tr.snapshots.size(); ++i)
    EXPECT_LT(tr.snapshots[i - 1].t, tr.snapshots[i].t);
  const auto csv = trajectory_csv(tr);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,loss,grad_norm,w_norm,sumsq_steps");
}

TEST(Run, ConvergesBelowBound) {
  const auto ds = synthesize(2, 512, 1.0, 0.5, 1);
  const auto tr = run(at_bound(ds, SamplingMode::WithReplacement, 1, 0.5, 1000000), ds);
  EXPECT_LT(tr.final().loss, 1e-3 * tr.initial().loss);
}

TEST(Run, OverflowTruncatesWithFlag) {
  const auto ds = columns({{1, 0}, {0.5, 1}});
  SgdConfig c;
  c.eta = 1e300;
  c.batch_size = 1;
  c.iterations = 100;
  c.loss = exponential_loss();
  c.w0 = Vector{-600, 0};
  const auto tr = run(c, ds);
  EXPECT_TRUE(tr.diverged);
  EXPECT_GE(tr.diverged_at, 1u);
  for (const auto& s : tr.snapshots) EXPECT_TRUE(std::isfinite(s.loss));
}

TEST(Run, WarnsOnNonSeparableData) {
  SgdConfig c;
  c.eta = 0.1;
  c.iterations = 10;
  const auto tr = run(c, columns({{1, 0}, {-1, 0}}));
  ASSERT_EQ(tr.warnings.size(), 1u);
  EXPECT_EQ(tr.warnings[0], "dataset is not separable");
}

TEST(Run, ConfigErrors) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  SgdConfig c;
  c.eta = -1.0;
  EXPECT_THROW(run(c, ds), SgdError);
  c.eta = 0.1;
  c.iterations = 0;
  EXPECT_THROW(run(c, ds), SgdError);
  c.iterations = 5;
  c.w0 = Vector{1, 2, 3};
  EXPECT_THROW(run(c, ds), SgdError);
  c.w0 = Vector{};
  c.batch_size = 3;
  EXPECT_THROW(run(c, ds), ScheduleError);
}

const SamplingMode kModes[] = {SamplingMode::WithReplacement,
                               SamplingMode::ShuffleEachEpoch,
                               SamplingMode::RoundRobin, SamplingMode::Custom};

TEST(EveryMode, NormDivergesUnderBound) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  for (auto mode : kModes) {
    SCOPED_TRACE(std::string(to_string(mode)));
    auto c = at_bound(ds, mode, 2, 0.9, 1000000);
    c.snapshots.extra = {1000};
    const auto tr = run(c, ds);
    ASSERT_FALSE(tr.diverged);
    EXPECT_GT(norm(tr.final().w), norm(at(tr, 1000).w));
  }
}

TEST(EveryMode, EpochLossTrendDecreases) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  const std::uint64_t epochs = 5000, k = 4;
  for (auto mode : kModes) {
    SCOPED_TRACE(std::string(to_string(mode)));
    auto c = at_bound(ds, mode, 2, 0.9, epochs * k);
    c.snapshots.ratio = 10.0;
    for (std::uint64_t e = 1; e <= epochs; ++e) c.snapshots.extra.push_back(e * k);
    const auto tr = run(c, ds);
    std::vector<double> loss(epochs + 1);
    for (const auto& s : tr.snapshots)
      if (s.t % k == 0) loss[s.t / k] = s.loss;
    for (std::uint64_t e = epochs / 5; e + 10 <= epochs; ++e)
      ASSERT_LT(loss[e + 10], loss[e]) << "epoch " << e;
  }
}

// The partition bound is far smaller, so those modes need a longer run
// before the final decade stops contributing.
TEST(EveryMode, StepsSquareSummable) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 2);
  for (auto mode : kModes) {
    SCOPED_TRACE(std::string(to_string(mode)));
    const std::uint64_t total =
        mode == SamplingMode::WithReplacement ? 1000000 : 10000000;
    auto c = at_bound(ds, mode, 2, 0.9, total);
    c.snapshots.extra = {total / 10};
    const auto tr = run(c, ds);
    const double sum = tr.final().sumsq_steps;
    EXPECT_LT(sum - at(tr, total / 10).sumsq_steps, 0.01 * sum);
  }
}

TEST(EpochDrift, HoldsUnderPartitionBound) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  const auto sol = solve_hard_margin(ds);
  const double sigma = spectral_norm(ds.matrix());
  auto c = at_bound(ds, SamplingMode::RoundRobin, 2, 0.9, 40000);
  c.record_batches = true;
  c.snapshots.unit = 4;
  const auto tr = run(c, ds);
  std::size_t checked = 0;
  for (const auto& s : tr.snapshots) {
    if (s.t + 4 > tr.batches.size()) break;
    const std::vector<Batch> epoch(tr.batches.begin() + static_cast<std::ptrdiff_t>(s.t),
                                   tr.batches.begin() + static_cast<std::ptrdiff_t>(s.t + 4));
    const auto chk = check_epoch_drift(s.w, epoch, ds, c.loss, c.eta, 2,
                                       sol.gamma, sigma);
    EXPECT_TRUE(chk.holds()) << "t=" << s.t << " lin=" << chk.linearization
                             << " disp=" << chk.displacement
                             << " grad=" << chk.gradient;
    ++checked;
  }
  EXPECT_GT(checked, 50u);
}

TEST(EpochDrift, FarAboveBoundIsUnbounded) {
  const auto ds = synthesize(2, 8, 1.0, 0.5, 1);
  const auto sol = solve_hard_margin(ds);
  const double sigma = spectral_norm(ds.matrix());
  const auto c = at_bound(ds, SamplingMode::RoundRobin, 2, 50.0, 1);
  const std::vector<Batch> epoch{{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  const auto chk = check_epoch_drift(Vector{0, 0}, epoch, ds, c.loss, c.eta, 2,
                                     sol.gamma, sigma);
  EXPECT_FALSE(chk.holds());
}

}  // namespace
}  // namespace septrack
