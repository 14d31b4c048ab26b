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

/// @file sampler.hpp
/// Minibatch index schedules. WithReplacement draws an independent uniform
/// B-subset per step; the other modes emit epochs of K = N / B batches that
/// partition {0..N-1}.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "septrack/io.hpp"
#include "septrack/rng.hpp"

namespace septrack {

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SamplingMode { WithReplacement, ShuffleEachEpoch, RoundRobin, Custom };

inline std::string_view to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::WithReplacement: return "with_replacement";
    case SamplingMode::ShuffleEachEpoch: return "shuffle";
    case SamplingMode::RoundRobin: return "round_robin";
    case SamplingMode::Custom: return "custom";
  }
  return "?";
}

inline SamplingMode parse_sampling_mode(std::string_view s) {
  if (s == "with_replacement") return SamplingMode::WithReplacement;
  if (s == "shuffle") return SamplingMode::ShuffleEachEpoch;
  if (s == "round_robin") return SamplingMode::RoundRobin;
  if (s == "custom") return SamplingMode::Custom;
  throw ScheduleError("unknown schedule mode '" + std::string(s) + "'");
}

/// Without-replacement modes need every epoch to partition the data.
inline bool is_without_replacement(SamplingMode m) {
  return m != SamplingMode::WithReplacement;
}

using Batch = std::vector<std::size_t>;

/// K = N / B; B must divide N.
inline std::size_t batches_per_epoch(std::size_t n, std::size_t b) {
  if (b == 0 || n == 0) throw ScheduleError("N and B must be positive");
  if (b > n) throw ScheduleError("B exceeds N");
  if (n % b != 0)
    throw ScheduleError("B=" + std::to_string(b) + " does not divide N=" +
                        std::to_string(n));
  return n / b;
}

/// Checks that each window of K consecutive batches partitions {0..N-1}.
/// Messages use 1-based epochs and indices.
inline void validate_partition(const std::vector<Batch>& order, std::size_t n,
                               std::size_t b) {
  const std::size_t k = batches_per_epoch(n, b);
  if (order.empty()) throw ScheduleError("custom order is empty");
  if (order.size() % k != 0)
    throw ScheduleError("custom order has " + std::to_string(order.size()) +
                        " batches, not a multiple of K=" + std::to_string(k));
  std::vector<int> seen(n);
  for (std::size_t e = 0; e < order.size() / k; ++e) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t j = 0; j < k; ++j) {
      const Batch& batch = order[e * k + j];
      if (batch.size() != b)
        throw ScheduleError("epoch " + std::to_string(e + 1) + ": batch of size " +
                            std::to_string(batch.size()) + ", expected " +
                            std::to_string(b));
      for (std::size_t idx : batch) {
        if (idx >= n)
          throw ScheduleError("epoch " + std::to_string(e + 1) + ": index " +
                              std::to_string(idx + 1) + " out of range");
        if (++seen[idx] > 1)
          throw ScheduleError("epoch " + std::to_string(e + 1) +
                              ": duplicated index " + std::to_string(idx + 1));
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      if (seen[i] == 0)
        throw ScheduleError("epoch " + std::to_string(e + 1) +
                            ": missing index " + std::to_string(i + 1));
  }
}

/// Order file: one batch per line, B whitespace-separated 1-based indices;
/// '#' starts a comment. Returns 0-based batches.
inline std::vector<Batch> parse_order(std::string_view text) {
  std::vector<Batch> order;
  std::size_t lineno = 0;
  for (auto line : split(text, '\n')) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    Batch batch;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      std::uint64_t v;
      if (!parse_u64(line.substr(pos, end - pos), v) || v == 0)
        throw ScheduleError("order file line " + std::to_string(lineno) +
                            ": bad index '" +
                            std::string(line.substr(pos, end - pos)) + "'");
      batch.push_back(static_cast<std::size_t>(v - 1));
      pos = end;
    }
    order.push_back(std::move(batch));
  }
  return order;
}

inline std::vector<Batch> load_order_file(const std::filesystem::path& path) {
  return parse_order(read_file(path));
}

inline std::string format_order(const std::vector<Batch>& order) {
  std::string out;
  for (const auto& b : order) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(b[i] + 1);
    }
    out += '\n';
  }
  return out;
}

/// A stateful batch stream owned by one run.
class Schedule {
 public:
  Schedule(SamplingMode mode, std::size_t n, std::size_t b, std::uint64_t seed,
           std::vector<Batch> custom_order = {})
      : mode_(mode),
        n_(n),
        b_(b),
        k_(septrack::batches_per_epoch(n, b)),
        rng_(derive_seed(seed, 16)),
        order_(std::move(custom_order)) {
    if (mode_ == SamplingMode::Custom) {
      validate_partition(order_, n_, b_);
    } else if (!order_.empty()) {
      throw ScheduleError("custom order given for a non-custom mode");
    }
    perm_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
    if (mode_ == SamplingMode::WithReplacement) mark_.assign(n_, 0);
  }

  SamplingMode mode() const noexcept { return mode_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t batch_size() const noexcept { return b_; }
  std::size_t batches_per_epoch() const noexcept { return k_; }
  std::uint64_t cursor() const noexcept { return cursor_; }

  /// Next minibatch of B distinct 0-based indices; advances the cursor.
  Batch next_batch() {
    Batch out;
    next_batch_into(out);
    return out;
  }

  void next_batch_into(Batch& out) {
    out.clear();
    const std::size_t slot = static_cast<std::size_t>(cursor_ % k_);
    switch (mode_) {
      case SamplingMode::WithReplacement:
        floyd_subset(out);
        break;
      case SamplingMode::ShuffleEachEpoch:
        if (slot == 0) {
          for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
          rng_.shuffle(perm_);
        }
        out.assign(perm_.begin() + static_cast<std::ptrdiff_t>(slot * b_),
                   perm_.begin() + static_cast<std::ptrdiff_t>((slot + 1) * b_));
        break;
      case SamplingMode::RoundRobin:
        for (std::size_t i = 0; i < b_; ++i) out.push_back(slot * b_ + i);
        break;
      case SamplingMode::Custom:
        out = order_[static_cast<std::size_t>(cursor_ % order_.size())];
        break;
    }
    ++cursor_;
  }

 private:
  // Floyd's algorithm: a uniform B-subset in B draws. Returned sorted.
  void floyd_subset(Batch& out) {
    for (std::size_t j = n_ - b_; j < n_; ++j) {
      const auto t = static_cast<std::size_t>(rng_.below(j + 1));
      const std::size_t pick = mark_[t] ? j : t;
      mark_[pick] = 1;
      out.push_back(pick);
    }
    for (std::size_t i : out) mark_[i] = 0;
    std::sort(out.begin(), out.end());
  }

  SamplingMode mode_;
  std::size_t n_;
  std::size_t b_;
  std::size_t k_;
  Rng rng_;
  std::vector<Batch> order_;
  std::vector<std::size_t> perm_;
  std::vector<char> mark_;
  std::uint64_t cursor_ = 0;
};

}  // namespace septrack
