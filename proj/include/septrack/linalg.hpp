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

/// @file linalg.hpp
/// Small dense linear algebra: vectors, row-major matrices, norms, the
/// spectral norm by power iteration, numeric rank and orthogonal projectors.
/// Everything here is sized for desk-scale problems (d and N in the
/// thousands at most) and makes no attempt at blocking or vectorization.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace septrack {

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kProjectorTol = 1e-10;
inline constexpr double kSpectralTol = 1e-8;

/// Dense real vector. Thin value wrapper over std::vector<double>.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  Vector(std::initializer_list<double> init) : v_(init) {}
  explicit Vector(std::vector<double> values) : v_(std::move(values)) {}
  explicit Vector(std::span<const double> values)
      : v_(values.begin(), values.end()) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }

  double& operator[](std::size_t i) noexcept { return v_[i]; }
  double operator[](std::size_t i) const noexcept { return v_[i]; }

  double* data() noexcept { return v_.data(); }
  const double* data() const noexcept { return v_.data(); }

  std::span<double> span() noexcept { return v_; }
  std::span<const double> span() const noexcept { return v_; }
  operator std::span<const double>() const noexcept { return v_; }

  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  const std::vector<double>& values() const noexcept { return v_; }

  bool operator==(const Vector&) const = default;

  Vector& operator+=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Vector& operator*=(double s) noexcept {
    for (auto& x : v_) x *= s;
    return *this;
  }

 private:
  void check_same(const Vector& o) const {
    if (o.size() != size()) throw LinalgError("vector size mismatch");
  }
  std::vector<double> v_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double s, Vector a) { return a *= s; }
inline Vector operator*(Vector a, double s) { return a *= s; }
inline Vector operator-(Vector a) { return a *= -1.0; }

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw LinalgError("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) {
  // Scaled to survive the large iterates of long runs.
  double scale = 0.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : a) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

inline double norm_sq(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw LinalgError("axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(),
                     [](double x) { return std::isfinite(x); });
}

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), a_(std::move(row_major)) {
    if (a_.size() != rows_ * cols_)
      throw LinalgError("matrix entries do not match shape");
  }

  /// Builds a matrix whose columns are the given vectors.
  static Matrix from_columns(const std::vector<Vector>& columns) {
    if (columns.empty()) return {};
    const std::size_t r = columns.front().size();
    Matrix m(r, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].size() != r) throw LinalgError("ragged columns");
      for (std::size_t i = 0; i < r; ++i) m(i, j) = columns[j][i];
    }
    return m;
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return a_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    return a_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return a_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const noexcept {
    return {a_.data() + i * cols_, cols_};
  }
  Vector col(std::size_t j) const {
    Vector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  /// Keeps only the listed columns, in the listed order.
  Matrix select_columns(std::span<const std::size_t> idx) const {
    Matrix m(rows_, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j)
      for (std::size_t i = 0; i < rows_; ++i) m(i, j) = (*this)(i, idx[j]);
    return m;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  const std::vector<double>& entries() const noexcept { return a_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

inline Vector operator*(const Matrix& m, std::span<const double> v) {
  if (v.size() != m.cols()) throw LinalgError("matvec: size mismatch");
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
  return out;
}
inline Vector operator*(const Matrix& m, const Vector& v) {
  return m * v.span();
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw LinalgError("matmul: size mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw LinalgError("matrix difference: shape mismatch");
  Matrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

/// Largest absolute entry.
inline double max_abs(const Matrix& m) {
  double s = 0.0;
  for (double x : m.entries()) s = std::max(s, std::abs(x));
  return s;
}

inline double frobenius_norm(const Matrix& m) { return norm(m.entries()); }

inline void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m.entries()))
    throw LinalgError(std::string(what) + ": non-finite entries");
}

/// Gram matrix of the smaller side: X Xᵀ when rows <= cols, else Xᵀ X.
/// Both share the nonzero spectrum, squared singular values of X.
inline Matrix small_gram(const Matrix& x) {
  const bool by_rows = x.rows() <= x.cols();
  const std::size_t n = by_rows ? x.rows() : x.cols();
  Matrix g(n, n);
  if (by_rows) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        g(i, j) = g(j, i) = dot(x.row(i), x.row(j));
  } else {
    const Matrix xt = x.transpose();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j)
        g(i, j) = g(j, i) = dot(xt.row(i), xt.row(j));
  }
  return g;
}

namespace detail {

struct PowerResult {
  double lambda = 0.0;
  bool converged = false;
};

inline PowerResult power_iterate(const Matrix& g, Vector v, double tol,
                                 std::size_t max_iters) {
  PowerResult r;
  double nv = norm(v);
  if (nv == 0.0) return r;
  v *= 1.0 / nv;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector gv = g * v;
    const double lambda = dot(v, gv);
    // Residual of the Rayleigh pair; small residual pins an eigenvalue.
    Vector res = gv;
    axpy(-lambda, v, res.span());
    r.lambda = lambda;
    const double ngv = norm(gv);
    if (ngv == 0.0) {
      r.converged = true;
      return r;
    }
    if (norm(res) <= tol * std::abs(lambda)) {
      r.converged = true;
      return r;
    }
    gv *= 1.0 / ngv;
    v = std::move(gv);
  }
  return r;
}

}  // namespace detail

/// Largest singular value of x by power iteration on the smaller Gram
/// matrix, started from the normalized all-ones vector.
///
/// If the iteration lands on an eigenvalue below the largest Gram diagonal
/// entry (a certain underestimate, since λ_max >= max_i G_ii) it restarts
/// from the coordinate vector of that diagonal entry.
inline double spectral_norm(const Matrix& x, double tol = kSpectralTol) {
  if (x.empty()) throw LinalgError("spectral_norm: empty matrix");
  if (!(tol > 0.0)) throw LinalgError("spectral_norm: tol must be positive");
  require_finite(x, "spectral_norm");
  if (max_abs(x) == 0.0) return 0.0;

  const Matrix g = small_gram(x);
  const std::size_t n = g.rows();
  // Eigenvalue accuracy tol^2 on G gives accuracy ~tol on sigma.
  const double gtol = std::max(tol * tol, 1e-15);
  constexpr std::size_t kMaxIters = 200000;

  auto best = detail::power_iterate(g, Vector(n, 1.0), gtol, kMaxIters);
  std::size_t jmax = 0;
  for (std::size_t j = 1; j < n; ++j)
    if (g(j, j) > g(jmax, jmax)) jmax = j;
  if (best.lambda < g(jmax, jmax) * (1.0 - tol)) {
    Vector e(n, 0.0);
    e[jmax] = 1.0;
    auto alt = detail::power_iterate(g, e, gtol, kMaxIters);
    if (alt.lambda > best.lambda) best = alt;
  }
  return std::sqrt(std::max(best.lambda, 0.0));
}

namespace detail {

/// Modified Gram-Schmidt with column pivoting. Returns the orthonormal basis
/// vectors accepted (residual norm above threshold) in pivot order.
inline std::vector<Vector> pivoted_orthonormal_basis(const Matrix& cols,
                                                     double threshold) {
  std::vector<Vector> work;
  work.reserve(cols.cols());
  for (std::size_t j = 0; j < cols.cols(); ++j) work.push_back(cols.col(j));
  std::vector<bool> used(work.size(), false);
  std::vector<Vector> basis;
  const std::size_t max_rank = std::min(cols.rows(), cols.cols());
  while (basis.size() < max_rank) {
    std::size_t pick = work.size();
    double pick_norm = -1.0;
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (used[j]) continue;
      const double nj = norm(work[j]);
      if (nj > pick_norm) {
        pick_norm = nj;
        pick = j;
      }
    }
    if (pick == work.size() || !(pick_norm > threshold)) break;
    used[pick] = true;
    Vector q = work[pick];
    // Second orthogonalization pass for numerical orthogonality.
    for (const auto& b : basis) axpy(-dot(b, q), b, q.span());
    q *= 1.0 / norm(q);
    for (std::size_t j = 0; j < work.size(); ++j) {
      if (used[j]) continue;
      axpy(-dot(q, work[j]), q, work[j].span());
    }
    basis.push_back(std::move(q));
  }
  return basis;
}

}  // namespace detail

/// Count of singular values above tol * sigma_max, estimated from the
/// residual norms of a pivoted Gram-Schmidt sweep.
inline std::size_t numeric_rank(const Matrix& x, double tol = kProjectorTol) {
  if (!(tol > 0.0)) throw LinalgError("numeric_rank: tol must be positive");
  require_finite(x, "numeric_rank");
  if (x.empty() || max_abs(x) == 0.0) return 0;
  const double smax = spectral_norm(x);
  return detail::pivoted_orthonormal_basis(x, tol * smax).size();
}

/// Orthogonal projector onto span(columns). The complement is I - P.
inline Matrix orthogonal_projector(const Matrix& columns,
                                   double tol = kProjectorTol) {
  if (columns.empty())
    throw LinalgError("orthogonal_projector: no columns given");
  require_finite(columns, "orthogonal_projector");
  const std::size_t d = columns.rows();
  Matrix p(d, d);
  if (max_abs(columns) == 0.0) return p;
  const double smax = spectral_norm(columns);
  const auto basis = detail::pivoted_orthonormal_basis(columns, tol * smax);
  for (const auto& q : basis)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) p(i, j) += q[i] * q[j];
  // Exact symmetry.
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      p(i, j) = p(j, i) = 0.5 * (p(i, j) + p(j, i));
  return p;
}

/// Solves the square system a x = b by Gaussian elimination with partial
/// pivoting. Throws when a pivot falls below tol * max|a|.
inline Vector solve(Matrix a, Vector b, double tol = 1e-13) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw LinalgError("solve: bad shapes");
  const double scale = std::max(max_abs(a), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (std::abs(a(p, k)) <= tol * scale)
      throw LinalgError("solve: singular matrix");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(b[k], b[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  Vector x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a(k, j) * x[j];
    x[k] = s / a(k, k);
  }
  return x;
}

/// Minimum-norm least-squares solution of a x ≈ b, through the pivoted
/// orthonormal basis of a's row space.
inline Vector least_squares(const Matrix& a, const Vector& b,
                            double tol = kProjectorTol) {
  if (a.rows() != b.size()) throw LinalgError("least_squares: bad shapes");
  const std::size_t n = a.cols();
  Vector x(n, 0.0);
  if (a.empty() || max_abs(a) == 0.0) return x;
  // Row space basis Q (columns of aᵀ), then x = Q y with (a Q) y ≈ b.
  const Matrix at = a.transpose();
  const auto q = detail::pivoted_orthonormal_basis(at, tol * spectral_norm(a));
  const std::size_t r = q.size();
  if (r == 0) return x;
  Matrix aq(a.rows(), r);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < r; ++k) aq(i, k) = dot(a.row(i), q[k]);
  // Normal equations on the reduced, full-column-rank system.
  Matrix m(r, r);
  Vector rhs(r);
  for (std::size_t k = 0; k < r; ++k) {
    for (std::size_t l = k; l < r; ++l) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) s += aq(i, k) * aq(i, l);
      m(k, l) = m(l, k) = s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += aq(i, k) * b[i];
    rhs[k] = s;
  }
  const Vector y = solve(std::move(m), std::move(rhs), 1e-15);
  for (std::size_t k = 0; k < r; ++k) axpy(y[k], q[k], x.span());
  return x;
}

}  // namespace septrack
