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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "septrack/sampler.hpp"

namespace septrack {
namespace {

std::string error_of(const std::vector<Batch>& order, std::size_t n,
                     std::size_t b) {
  try {
    Schedule s(SamplingMode::Custom, n, b, 1, order);
  } catch (const ScheduleError& e) {
    return e.what();
  }
  return "";
}

void expect_partitions(Schedule& s, std::size_t epochs) {
  const std::size_t n = s.n(), k = s.batches_per_epoch();
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<int> seen(n, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto batch = s.next_batch();
      ASSERT_EQ(batch.size(), s.batch_size());
      for (auto i : batch) ++seen[i];
    }
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], 1) << "epoch " << e;
  }
}

TEST(BatchesPerEpoch, Examples) {
  EXPECT_EQ(batches_per_epoch(512, 1), 512u);
  EXPECT_EQ(batches_per_epoch(512, 512), 1u);
  EXPECT_THROW(batches_per_epoch(512, 3), ScheduleError);
  EXPECT_THROW(batches_per_epoch(4, 0), ScheduleError);
  EXPECT_THROW(batches_per_epoch(4, 8), ScheduleError);
}

TEST(Schedule, RoundRobin) {
  Schedule s(SamplingMode::RoundRobin, 4, 2, 1);
  EXPECT_EQ(s.next_batch(), (Batch{0, 1}));
  EXPECT_EQ(s.next_batch(), (Batch{2, 3}));
  EXPECT_EQ(s.next_batch(), (Batch{0, 1}));
  EXPECT_EQ(s.next_batch(), (Batch{2, 3}));
}

TEST(Schedule, ShuffleTwoBatchesCoverData) {
  Schedule s(SamplingMode::ShuffleEachEpoch, 4, 2, 5);
  auto a = s.next_batch(), b = s.next_batch();
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  EXPECT_EQ(a, (Batch{0, 1, 2, 3}));
}

TEST(Schedule, ShuffleChangesOrderBetweenEpochs) {
  Schedule s(SamplingMode::ShuffleEachEpoch, 32, 4, 5);
  std::vector<Batch> e1, e2;
  for (int j = 0; j < 8; ++j) e1.push_back(s.next_batch());
  for (int j = 0; j < 8; ++j) e2.push_back(s.next_batch());
  EXPECT_NE(e1, e2);
}

TEST(Schedule, WithoutReplacementModesPartitionEveryEpoch) {
  Schedule rr(SamplingMode::RoundRobin, 12, 3, 1);
  expect_partitions(rr, 100);
  Schedule sh(SamplingMode::ShuffleEachEpoch, 12, 3, 2);
  expect_partitions(sh, 100);
  Schedule cu(SamplingMode::Custom, 4, 2, 1,
              {{1, 3}, {0, 2}, {2, 1}, {3, 0}});
  expect_partitions(cu, 100);
}

TEST(Schedule, DeterministicStreams) {
  for (auto mode : {SamplingMode::WithReplacement, SamplingMode::ShuffleEachEpoch}) {
    Schedule a(mode, 16, 4, 99), b(mode, 16, 4, 99), c(mode, 16, 4, 100);
    bool differs = false;
    for (int i = 0; i < 400; ++i) {
      const auto x = a.next_batch();
      EXPECT_EQ(x, b.next_batch());
      differs = differs || x != c.next_batch();
    }
    EXPECT_TRUE(differs);
  }
}

TEST(Schedule, WithReplacementUniformMarginal) {
  const std::size_t n = 8, b = 2, draws = 100000;
  Schedule s(SamplingMode::WithReplacement, n, b, 3);
  std::vector<double> hits(n, 0.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto batch = s.next_batch();
    ASSERT_EQ(batch.size(), b);
    ASSERT_LT(batch[0], batch[1]);  // distinct, sorted
    for (auto i : batch) hits[i] += 1.0;
  }
  // Each index is in a batch with probability B/N = 1/K.
  const double p = static_cast<double>(b) / n;
  const double sd = std::sqrt(draws * p * (1.0 - p));
  for (double h : hits) EXPECT_LE(std::abs(h - draws * p), 3.0 * sd);
}

TEST(Schedule, WithReplacementPairsUniform) {
  // All 28 pairs of 8 indices appear with probability 1/28.
  Schedule s(SamplingMode::WithReplacement, 8, 2, 4);
  std::vector<double> pair(64, 0.0);
  const int draws = 140000;
  for (int t = 0; t < draws; ++t) {
    const auto b = s.next_batch();
    pair[b[0] * 8 + b[1]] += 1.0;
  }
  const double p = 1.0 / 28.0, sd = std::sqrt(draws * p * (1.0 - p));
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = i + 1; j < 8; ++j)
      EXPECT_LE(std::abs(pair[i * 8 + j] - draws * p), 4.0 * sd);
}

TEST(CustomOrder, ValidationErrors) {
  EXPECT_NE(error_of({{0, 1}, {1, 3}}, 4, 2).find("epoch 1: duplicated index 2"),
            std::string::npos);
  EXPECT_NE(error_of({{0, 1}, {2, 3}, {0, 1}, {1, 3}}, 4, 2)
                .find("epoch 2: duplicated index 2"),
            std::string::npos);
  EXPECT_NE(error_of({{0, 1}, {2, 3}, {0, 1}}, 4, 2).find("multiple of K=2"),
            std::string::npos);
  EXPECT_NE(error_of({{0, 1}, {2, 7}}, 4, 2).find("out of range"), std::string::npos);
  EXPECT_NE(error_of({{0, 1, 2}, {3}}, 4, 2).find("batch of size 3"),
            std::string::npos);
  EXPECT_NE(error_of({}, 4, 2).find("empty"), std::string::npos);
  EXPECT_THROW(Schedule(SamplingMode::RoundRobin, 4, 2, 1, {{0, 1}, {2, 3}}),
               ScheduleError);
}

TEST(CustomOrder, RepeatWithinBatchNamed) {
  try {
    validate_partition({{0, 1}, {2, 2}}, 4, 2);
    FAIL();
  } catch (const ScheduleError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1: duplicated index 3"),
              std::string::npos);
  }
}

TEST(OrderFile, ParseAndFormat) {
  const auto order = parse_order("# adversarial\n1 2\n3\t4  # tail\n\n4 3\n2 1\n");
  EXPECT_EQ(order, (std::vector<Batch>{{0, 1}, {2, 3}, {3, 2}, {1, 0}}));
  EXPECT_EQ(format_order(order), "1 2\n3 4\n4 3\n2 1\n");
  EXPECT_EQ(parse_order(format_order(order)), order);
}

TEST(OrderFile, BadIndexCitesLine) {
  try {
    parse_order("1 2\n3 x\n");
    FAIL();
  } catch (const ScheduleError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_order("0 1\n"), ScheduleError);
}

TEST(SamplingMode, NamesRoundTrip) {
  for (auto m : {SamplingMode::WithReplacement, SamplingMode::ShuffleEachEpoch,
                 SamplingMode::RoundRobin, SamplingMode::Custom})
    EXPECT_EQ(parse_sampling_mode(to_string(m)), m);
  EXPECT_FALSE(is_without_replacement(SamplingMode::WithReplacement));
  EXPECT_TRUE(is_without_replacement(SamplingMode::RoundRobin));
}

}  // namespace
}  // namespace septrack
