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

/// @file dataset.hpp
/// Label-absorbed datasets: construction, the planted-margin synthetic
/// generator, separability checking, the nonnegative-image-norm oracle and
/// the CSV file format.
///
/// A dataset is a d x N matrix X whose columns are samples y_n x_n, so every
/// effective label is +1 and separability means some w has X^T w > 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "septrack/io.hpp"
#include "septrack/linalg.hpp"
#include "septrack/rng.hpp"

namespace septrack {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ground truth recorded by the generator.
struct PlantedInfo {
  double gamma_true = 0.0;
  std::vector<std::size_t> support;  // 0-based column indices
  Vector direction;                  // unit max-margin direction

  bool operator==(const PlantedInfo&) const = default;
};

class Dataset {
 public:
  Dataset() = default;

  /// x is d x N, one sample per column.
  explicit Dataset(Matrix x, std::string name = "dataset",
                   std::optional<PlantedInfo> planted = std::nullopt)
      : x_(std::move(x)), name_(std::move(name)), planted_(std::move(planted)) {
    if (x_.rows() == 0 || x_.cols() == 0)
      throw DatasetError("dataset needs d >= 1 and N >= 1");
    if (!all_finite(x_.entries()))
      throw DatasetError("dataset has non-finite entries");
    samples_ = x_.transpose();
    for (std::size_t n = 0; n < x_.cols(); ++n)
      if (norm(samples_.row(n)) == 0.0)
        throw DatasetError("sample " + std::to_string(n + 1) + " is zero");
  }

  std::size_t dim() const noexcept { return x_.rows(); }
  std::size_t size() const noexcept { return x_.cols(); }
  const Matrix& matrix() const noexcept { return x_; }
  const std::string& name() const noexcept { return name_; }
  const std::optional<PlantedInfo>& planted() const noexcept {
    return planted_;
  }

  /// Contiguous view of sample n.
  std::span<const double> sample(std::size_t n) const noexcept {
    return samples_.row(n);
  }

  /// Hash of the shape and the raw entries.
  std::uint64_t fingerprint() const noexcept {
    Fnv1a h;
    h.add(static_cast<std::uint64_t>(dim()));
    h.add(static_cast<std::uint64_t>(size()));
    for (double v : x_.entries()) h.add(v);
    return h.value();
  }

  bool operator==(const Dataset& o) const {
    return x_ == o.x_ && name_ == o.name_ && planted_ == o.planted_;
  }

 private:
  Matrix x_;
  Matrix samples_;  // N x d
  std::string name_;
  std::optional<PlantedInfo> planted_;
};

/// Replaces column n of points by labels[n] * points[:, n].
inline Dataset absorb_labels(const Matrix& points,
                             std::span<const double> labels,
                             std::string name = "dataset") {
  if (labels.size() != points.cols())
    throw DatasetError("label count does not match sample count");
  Matrix x = points;
  for (std::size_t n = 0; n < points.cols(); ++n) {
    const double y = labels[n];
    if (y != 1.0 && y != -1.0)
      throw DatasetError("label " + std::to_string(n + 1) + " is not +-1");
    for (std::size_t i = 0; i < points.rows(); ++i) x(i, n) *= y;
  }
  return Dataset(std::move(x), std::move(name));
}

// Synthetic geometry, in units of gamma. The planted pair sits at margin
// gamma with offsets +a and -b along a unit vector v orthogonal to the
// max-margin direction u; a != b makes the pair's duals unequal. Bulk
// margins follow a normal centered at kBulkCenter * gamma with standard
// deviation gamma, truncated below at gamma + gap; orthogonal components are
// isotropic normal with the same deviation.
inline constexpr double kSvOffsetA = 1.0;
inline constexpr double kSvOffsetB = 0.8;
inline constexpr double kBulkCenter = 0.5;

namespace detail {

inline Vector random_unit(Rng& rng, std::size_t d) {
  for (;;) {
    Vector v(d);
    for (auto& x : v) x = rng.normal();
    const double n = norm(v);
    if (n > 1e-8) return (1.0 / n) * v;
  }
}

struct Geometry {
  Vector u;  // max-margin direction
  Vector v;  // in-plane offset direction for the planted pair
};

inline Geometry make_geometry(std::size_t d, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  Geometry g;
  g.u = random_unit(rng, d);
  for (;;) {
    Vector v = random_unit(rng, d);
    axpy(-dot(v, g.u), g.u, v.span());
    const double n = norm(v);
    if (n > 1e-6) {
      g.v = (1.0 / n) * v;
      break;
    }
  }
  return g;
}

/// Isotropic normal vector projected onto the complement of u.
inline Vector orthogonal_normal(Rng& rng, const Vector& u, double scale) {
  Vector g(u.size());
  for (auto& x : g) x = rng.normal();
  axpy(-dot(g, u), u, g.span());
  return scale * g;
}

}  // namespace detail

/// Synthetic separable data with a known max-margin direction and exactly
/// two support vectors at margin gamma. The remaining N - 2 samples have
/// margin >= gamma + gap. Same arguments, same bytes.
inline Dataset synthesize(std::size_t d, std::size_t n, double gamma,
                          double gap, std::uint64_t seed) {
  if (d < 2) throw DatasetError("synthesize needs d >= 2");
  if (n < 2) throw DatasetError("synthesize needs N >= 2");
  if (!(gamma > 0.0)) throw DatasetError("synthesize needs gamma > 0");
  if (!(gap >= 0.0))
    throw DatasetError("infeasible geometry: gap must be >= 0");

  const auto geo = detail::make_geometry(d, seed);
  Rng rng(derive_seed(seed, 1));

  // Seeded positions for the planted pair.
  const std::size_t p1 = static_cast<std::size_t>(rng.below(n));
  std::size_t p2 = static_cast<std::size_t>(rng.below(n - 1));
  if (p2 >= p1) ++p2;

  std::vector<Vector> cols(n);
  cols[p1] = gamma * geo.u + (kSvOffsetA * gamma) * geo.v;
  cols[p2] = gamma * geo.u - (kSvOffsetB * gamma) * geo.v;

  // Truncation point of the standardized bulk margin.
  const double z_floor = 1.0 + gap / gamma - kBulkCenter;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == p1 || j == p2) continue;
    const double m = gamma * (kBulkCenter + rng.normal_tail(z_floor));
    cols[j] = m * geo.u + detail::orthogonal_normal(rng, geo.u, gamma);
  }

  PlantedInfo planted;
  planted.gamma_true = gamma;
  planted.support = {std::min(p1, p2), std::max(p1, p2)};
  planted.direction = geo.u;

  std::ostringstream name;
  name << "synth-d" << d << "-n" << n << "-s" << seed;
  return Dataset(Matrix::from_columns(cols), name.str(), std::move(planted));
}

/// Held-out samples from the generator behind synthesize(d, ., gamma, ., seed)
/// without the margin floor, so a fraction of them fall on the wrong side of
/// the max-margin separator.
inline Dataset synthesize_holdout(std::size_t d, std::size_t m, double gamma,
                                  std::uint64_t seed,
                                  std::uint64_t holdout_seed) {
  if (d < 2) throw DatasetError("synthesize needs d >= 2");
  if (m < 1) throw DatasetError("holdout needs at least one sample");
  if (!(gamma > 0.0)) throw DatasetError("synthesize needs gamma > 0");
  const auto geo = detail::make_geometry(d, seed);
  Rng rng(derive_seed(holdout_seed, 2));
  std::vector<Vector> cols;
  cols.reserve(m);
  while (cols.size() < m) {
    const double margin = gamma * (kBulkCenter + rng.normal());
    Vector x = margin * geo.u + detail::orthogonal_normal(rng, geo.u, gamma);
    if (norm(x) == 0.0) continue;
    cols.push_back(std::move(x));
  }
  std::ostringstream name;
  name << "holdout-d" << d << "-m" << m << "-s" << seed << "-h" << holdout_seed;
  return Dataset(Matrix::from_columns(cols), name.str());
}

struct SeparabilityResult {
  bool separable = false;
  std::optional<Vector> witness;
  /// Set when neither a witness nor a non-separability certificate was
  /// found within the iteration caps.
  bool undetermined = false;
};

/// Perceptron on normalized samples; if it does not settle within
/// max_epochs, Frank-Wolfe on the nearest point of conv{x_n / |x_n|} to the
/// origin either finds a witness or certifies that the hull contains 0.
inline SeparabilityResult is_separable(const Dataset& data,
                                       std::size_t max_epochs = 10000,
                                       std::size_t max_fw_iters = 200000) {
  const std::size_t d = data.dim();
  const std::size_t n = data.size();
  std::vector<Vector> unit(n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector x(data.sample(j));
    unit[j] = (1.0 / norm(x)) * x;
  }
  auto separates = [&](const Vector& w) {
    for (const auto& x : unit)
      if (!(dot(w, x) > 0.0)) return false;
    return true;
  };

  Vector w(d, 0.0);
  for (std::size_t epoch = 0; epoch < max_epochs; ++epoch) {
    bool mistake = false;
    for (const auto& x : unit) {
      if (dot(w, x) <= 0.0) {
        w += x;
        mistake = true;
      }
    }
    if (!mistake) return {true, w, false};
  }

  // Nearest point of the hull to the origin; p is always a hull point.
  Vector p = unit[0];
  for (std::size_t it = 0; it < max_fw_iters; ++it) {
    if (separates(p)) return {true, p, false};
    std::size_t best = 0;
    double best_val = dot(unit[0], p);
    for (std::size_t j = 1; j < n; ++j) {
      const double v = dot(unit[j], p);
      if (v < best_val) {
        best_val = v;
        best = j;
      }
    }
    const Vector dir = unit[best] - p;
    const double dd = norm_sq(dir);
    if (dd == 0.0) break;
    const double step = std::clamp(-dot(p, dir) / dd, 0.0, 1.0);
    axpy(step, dir, p.span());
    if (norm(p) < 1e-9) return {false, std::nullopt, false};
  }
  return {false, std::nullopt, true};
}

/// Sampled upper approximation of min over v >= 0, |v| = 1 of |X v|.
/// Dense angular grids cover N = 2 and N = 3; larger N uses seeded random
/// directions of the nonnegative orthant plus its vertices.
inline double min_nonneg_image_norm(const Dataset& data, std::size_t samples,
                                    std::uint64_t seed = 1) {
  if (samples < 1) throw DatasetError("need at least one sample");
  const std::size_t n = data.size();
  Vector image(data.dim());
  auto image_norm = [&](std::span<const double> v) {
    std::fill(image.begin(), image.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (v[j] != 0.0) axpy(v[j], data.sample(j), image.span());
    return norm(image);
  };

  double best = std::numeric_limits<double>::infinity();
  // Vertices: single samples.
  for (std::size_t j = 0; j < n; ++j) best = std::min(best, norm(data.sample(j)));
  if (n == 1) return best;

  Vector v(n, 0.0);
  if (n == 2) {
    for (std::size_t k = 0; k <= samples; ++k) {
      const double phi = 0.5 * std::numbers::pi * static_cast<double>(k) /
                         static_cast<double>(samples);
      v[0] = std::cos(phi);
      v[1] = std::sin(phi);
      best = std::min(best, image_norm(v));
    }
    return best;
  }
  if (n == 3) {
    const auto per_axis = static_cast<std::size_t>(
        std::max(2.0, std::ceil(std::sqrt(static_cast<double>(samples)))));
    for (std::size_t a = 0; a <= per_axis; ++a) {
      const double theta = 0.5 * std::numbers::pi * static_cast<double>(a) /
                           static_cast<double>(per_axis);
      for (std::size_t b = 0; b <= per_axis; ++b) {
        const double phi = 0.5 * std::numbers::pi * static_cast<double>(b) /
                           static_cast<double>(per_axis);
        v[0] = std::sin(theta) * std::cos(phi);
        v[1] = std::sin(theta) * std::sin(phi);
        v[2] = std::cos(theta);
        best = std::min(best, image_norm(v));
      }
    }
    return best;
  }
  Rng rng(derive_seed(seed, 3));
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& c : v) c = std::abs(rng.normal());
    const double nv = norm(v);
    if (nv == 0.0) continue;
    v *= 1.0 / nv;
    best = std::min(best, image_norm(v));
  }
  return best;
}

// --- CSV format -----------------------------------------------------------
//
//   # septrack-dataset v1 d=<d> N=<N>
//   <N lines of d comma-separated decimals>
//   # key=value              (optional trailing metadata)

inline std::string to_csv(const Dataset& data) {
  std::string out = "# septrack-dataset v1 d=" + std::to_string(data.dim()) +
                    " N=" + std::to_string(data.size()) + "\n";
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto s = data.sample(n);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ',';
      out += format_double(s[i]);
    }
    out += '\n';
  }
  out += "# name=" + data.name() + "\n";
  out += "# rng=" + std::string(kRngAlgorithm) + "\n";
  if (const auto& p = data.planted()) {
    out += "# planted_gamma=" + format_double(p->gamma_true) + "\n";
    out += "# planted_support=";
    for (std::size_t i = 0; i < p->support.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(p->support[i] + 1);
    }
    out += "\n# planted_direction=";
    for (std::size_t i = 0; i < p->direction.size(); ++i) {
      if (i) out += ',';
      out += format_double(p->direction[i]);
    }
    out += '\n';
  }
  return out;
}

inline void save_csv(const Dataset& data, const std::filesystem::path& path) {
  write_file_atomic(path, to_csv(data));
}

inline Dataset parse_dataset_csv(std::string_view text) {
  auto fail = [](std::size_t line, const std::string& msg) -> DatasetError {
    return DatasetError("line " + std::to_string(line) + ": " + msg);
  };
  std::vector<std::string_view> lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DatasetError("no samples");

  const std::string_view header = trim(lines[0]);
  constexpr std::string_view kMagic = "# septrack-dataset v1 ";
  if (header.substr(0, kMagic.size()) != kMagic)
    throw fail(1, "missing '# septrack-dataset v1' header");
  std::uint64_t d = 0, n = 0;
  bool have_d = false, have_n = false;
  for (auto tok : split(header.substr(kMagic.size()), ' ')) {
    tok = trim(tok);
    if (tok.starts_with("d=")) have_d = parse_u64(tok.substr(2), d);
    else if (tok.starts_with("N=")) have_n = parse_u64(tok.substr(2), n);
  }
  if (!have_d || !have_n || d == 0) throw fail(1, "bad header fields");
  if (n == 0) throw DatasetError("no samples");

  std::vector<double> entries;  // N x d, row per sample
  entries.reserve(n * d);
  std::string name = "dataset";
  std::optional<double> pg;
  std::vector<std::size_t> psupport;
  std::vector<double> pdir;
  std::size_t rows = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const std::string_view line = trim(lines[li]);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = trim(body.substr(0, eq));
      const auto val = trim(body.substr(eq + 1));
      if (key == "name") {
        name = std::string(val);
      } else if (key == "planted_gamma") {
        double g;
        if (!parse_double(val, g)) throw fail(lineno, "bad planted_gamma");
        pg = g;
      } else if (key == "planted_support") {
        for (auto t : split(val, ',')) {
          std::uint64_t k;
          if (!parse_u64(t, k) || k == 0 || k > n)
            throw fail(lineno, "bad planted_support");
          psupport.push_back(static_cast<std::size_t>(k - 1));
        }
      } else if (key == "planted_direction") {
        for (auto t : split(val, ',')) {
          double c;
          if (!parse_double(t, c)) throw fail(lineno, "bad planted_direction");
          pdir.push_back(c);
        }
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != d)
      throw fail(lineno, "expected " + std::to_string(d) + " values, got " +
                             std::to_string(fields.size()));
    if (rows == n) throw fail(lineno, "more samples than N=" + std::to_string(n));
    for (auto f : fields) {
      double v;
      if (!parse_double(f, v)) throw fail(lineno, "bad number '" + std::string(f) + "'");
      entries.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw DatasetError("no samples");
  if (rows != n)
    throw DatasetError("header declares N=" + std::to_string(n) + " but found " +
                       std::to_string(rows) + " samples");
  std::optional<PlantedInfo> planted;
  if (pg) {
    if (pdir.size() != d) throw DatasetError("planted_direction has wrong size");
    planted = PlantedInfo{*pg, psupport, Vector(pdir)};
  }
  Matrix samples(n, d, std::move(entries));
  return Dataset(samples.transpose(), std::move(name), std::move(planted));
}

inline Dataset load_csv(const std::filesystem::path& path) {
  return parse_dataset_csv(read_file(path));
}

}  // namespace septrack
