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
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "septrack/linalg.hpp"
#include "septrack/rng.hpp"

namespace septrack {
namespace {

Matrix cols(const std::vector<Vector>& c) { return Matrix::from_columns(c); }

// Exact rank by fraction-free (Bareiss) elimination on integers.
std::size_t exact_rank(std::vector<std::vector<std::int64_t>> a) {
  const std::size_t m = a.size(), n = a.front().size();
  std::size_t rank = 0;
  std::int64_t prev = 1;
  for (std::size_t c = 0; c < n && rank < m; ++c) {
    std::size_t p = rank;
    while (p < m && a[p][c] == 0) ++p;
    if (p == m) continue;
    std::swap(a[p], a[rank]);
    for (std::size_t i = rank + 1; i < m; ++i) {
      for (std::size_t j = c + 1; j < n; ++j)
        a[i][j] = (a[rank][c] * a[i][j] - a[i][c] * a[rank][j]) / prev;
      a[i][c] = 0;
    }
    prev = a[rank][c];
    ++rank;
  }
  return rank;
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(spectral_norm(Matrix::identity(2)), 1.0, 1e-12);
  EXPECT_NEAR(spectral_norm(cols({{1, 1}, {1, -1}})), std::numbers::sqrt2,
              1e-12);
  EXPECT_NEAR(spectral_norm(cols({{3, 4}})), 5.0, 1e-12);
}

TEST(SpectralNorm, ZeroMatrixAndNonFinite) {
  EXPECT_EQ(spectral_norm(Matrix(3, 2)), 0.0);
  Matrix bad(2, 2);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(spectral_norm(bad), LinalgError);
}

TEST(SpectralNorm, KnownDiagonal) {
  Matrix m(3, 3);
  m(0, 0) = 0.5;
  m(1, 1) = -7.0;
  m(2, 2) = 2.0;
  EXPECT_NEAR(spectral_norm(m), 7.0, 7e-8);
}

TEST(SpectralNorm, BoundsEveryImage) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + rng.below(8), n = 1 + rng.below(8);
    Matrix x(d, n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j) x(i, j) = rng.normal();
    const double s = spectral_norm(x);
    for (int k = 0; k < 1000; ++k) {
      Vector v(n);
      for (auto& c : v) c = rng.normal();
      EXPECT_LE(norm(x * v), s * norm(v) * (1.0 + 1e-8));
    }
  }
}

TEST(NumericRank, Examples) {
  EXPECT_EQ(numeric_rank(Matrix::identity(2)), 2u);
  EXPECT_EQ(numeric_rank(cols({{1, 1}, {1, 1}})), 1u);
  EXPECT_EQ(numeric_rank(cols({{1, 0}, {0, 1}, {1, 1}})), 2u);
  EXPECT_EQ(numeric_rank(Matrix(2, 3)), 0u);
}

TEST(NumericRank, AgreesWithExactElimination) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 1 + rng.below(6), n = 1 + rng.below(6);
    std::vector<std::vector<std::int64_t>> a(d, std::vector<std::int64_t>(n));
    // Small entries and a planted dependent column make deficient ranks common.
    for (auto& row : a)
      for (auto& e : row) e = static_cast<std::int64_t>(rng.below(5)) - 2;
    if (n >= 3 && trial % 2 == 0)
      for (auto& row : a) row[n - 1] = row[0] - 2 * row[1];
    Matrix m(d, n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = static_cast<double>(a[i][j]);
    EXPECT_EQ(numeric_rank(m), exact_rank(a)) << "trial " << trial;
  }
}

TEST(Projector, Examples) {
  const Matrix p1 = orthogonal_projector(cols({{1, 0}}));
  EXPECT_NEAR(p1(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(p1(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(p1(1, 1), 0.0, 1e-15);

  const Matrix p2 = orthogonal_projector(cols({{1, 2, 0}, {0, 1, 1}, {3, 0, 1}}));
  EXPECT_LE(max_abs(p2 - Matrix::identity(3)), 1e-12);

  const Matrix p3 = orthogonal_projector(cols({{1, 1}}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(p3(i, j), 0.5, 1e-15);
}

TEST(Projector, IdempotentAndSymmetric) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng.below(8), n = 1 + rng.below(8);
    Matrix x(d, n);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < n; ++j) x(i, j) = rng.normal();
    const Matrix p = orthogonal_projector(x);
    EXPECT_LE(max_abs(p * p - p), 1e-10);
    EXPECT_LE(max_abs(p - p.transpose()), 1e-10);
    // Columns are fixed points.
    for (std::size_t j = 0; j < n; ++j)
      EXPECT_LE(norm(p * x.col(j) - x.col(j)), 1e-10 * (1.0 + norm(x.col(j))));
  }
}

TEST(Projector, EmptyColumnsRejected) {
  EXPECT_THROW(orthogonal_projector(Matrix()), LinalgError);
}

TEST(Solve, SquareSystem) {
  Matrix a(2, 2, {2, 1, 1, 3});
  const Vector x = solve(a, Vector{3, 5});
  EXPECT_NEAR(x[0], 0.8, 1e-14);
  EXPECT_NEAR(x[1], 1.4, 1e-14);
  EXPECT_THROW(solve(Matrix(2, 2, {1, 2, 2, 4}), Vector{1, 1}), LinalgError);
}

TEST(LeastSquares, MinimumNormSolution) {
  // One equation x + y = 2: minimum-norm solution (1, 1).
  const Vector x = least_squares(Matrix(1, 2, {1, 1}), Vector{2});
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 1.0, 1e-14);
  // Overdetermined, inconsistent: mean of the right-hand sides.
  const Vector y = least_squares(Matrix(3, 1, {1, 1, 1}), Vector{1, 2, 6});
  EXPECT_NEAR(y[0], 3.0, 1e-14);
}

TEST(Vector, Arithmetic) {
  Vector a{1, 2}, b{3, -1};
  EXPECT_EQ(a + b, (Vector{4, 1}));
  EXPECT_EQ(a - b, (Vector{-2, 3}));
  EXPECT_EQ(2.0 * a, (Vector{2, 4}));
  EXPECT_DOUBLE_EQ(dot(a, b), 1.0);
  EXPECT_DOUBLE_EQ(norm(Vector{3, 4}), 5.0);
  EXPECT_THROW(a += (Vector{1, 2, 3}), LinalgError);
}

TEST(Norm, NoOverflowForHugeEntries) {
  EXPECT_DOUBLE_EQ(norm(Vector{3e200, 4e200}), 5e200);
  EXPECT_DOUBLE_EQ(norm(Vector{3e-200, 4e-200}), 5e-200);
}

}  // namespace
}  // namespace septrack
