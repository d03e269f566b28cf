// Copyright 2026 The semrel Authors.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semrel/error.hpp"

namespace semrel {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Takes ownership of `data`; entries must be finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_shape(data_.size() == rows_ * cols_, "Matrix: data length " + std::to_string(data_.size()) +
                                                     " != rows*cols " + std::to_string(rows_ * cols_));
    for (std::size_t i = 0; i < data_.size(); ++i)
      require(std::isfinite(data_[i]), "Matrix: non-finite entry at flat index " + std::to_string(i));
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      require_shape(row.size() == c, "Matrix::from_rows: ragged rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    require_shape(same_shape(o), "Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) noexcept {
    for (double& x : data_) x *= s;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

/// this += s * o
inline void axpy(double s, const Matrix& o, Matrix& acc) {
  require_shape(acc.same_shape(o), "axpy: shape mismatch " + shape_str(acc) + " vs " + shape_str(o));
  auto& a = acc.data();
  const auto& b = o.data();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

inline double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double x : m.data()) r = std::max(r, std::abs(x));
  return r;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_shape(a.same_shape(b), "max_abs_diff: shape mismatch");
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a.data()[i] - b.data()[i]));
  return r;
}

// ---------------------------------------------------------------------------
// Reductions

/// log(sum(exp(v))) evaluated around the maximum.
inline double logsumexp(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("logsumexp: empty vector");
  double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log(exp(a) + exp(b))
inline double logaddexp(double a, double b) noexcept {
  double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline Vector log_softmax(std::span<const double> v) {
  double lse = logsumexp(v);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

/// Replaces logits by their softmax in place and returns their logsumexp.
inline double softmax_inplace(std::span<double> v) {
  if (v.empty()) throw PreconditionError("softmax: empty vector");
  double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : v) x /= s;
  return m + std::log(s);
}

inline Vector softmax(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("softmax: empty vector");
  Vector out = log_softmax(v);
  for (double& x : out) x = std::exp(x);
  return out;
}

inline double dot(std::span<const double> u, std::span<const double> v) {
  require_shape(u.size() == v.size(), "dot: length mismatch " + std::to_string(u.size()) + " vs " +
                                          std::to_string(v.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm2(std::span<const double> u) { return std::sqrt(dot(u, u)); }

// ---------------------------------------------------------------------------
// Products. Innermost loops run over contiguous memory.

/// a * b. Four output rows are updated per pass over b; every entry still
/// accumulates over the shared dimension in index order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul: " + shape_str(a) + " * " + shape_str(b));
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  Matrix c(n, m);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    double* c0 = c.row(i).data();
    double* c1 = c0 + m;
    double* c2 = c1 + m;
    double* c3 = c2 + m;
    for (std::size_t p = 0; p < inner; ++p) {
      const double a0 = a(i, p), a1 = a(i + 1, p), a2 = a(i + 2, p), a3 = a(i + 3, p);
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) {
        const double bj = bp[j];
        c0[j] += a0 * bj;
        c1[j] += a1 * bj;
        c2[j] += a2 * bj;
        c3[j] += a3 * bj;
      }
    }
  }
  for (; i < n; ++i) {
    double* ci = c.row(i).data();
    for (std::size_t p = 0; p < inner; ++p) {
      const double aip = a(i, p);
      const double* bp = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b^T. Each entry accumulates over the shared dimension in index order,
/// the same order as dot().
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt: " + shape_str(a) + " * (" + shape_str(b) + ")^T");
  return matmul(a, transpose(b));
}

/// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows(), "matmul_tn: (" + shape_str(a) + ")^T * " + shape_str(b));
  return matmul(transpose(a), b);
}

// ---------------------------------------------------------------------------
// Row normalization

inline constexpr double kMinRowNorm = 1e-12;

/// Divides each row by its Euclidean norm. Throws if a row norm is <= 1e-12.
inline Matrix l2_normalize_rows(const Matrix& m, Vector* norms_out = nullptr) {
  Matrix out(m.rows(), m.cols());
  if (norms_out) norms_out->assign(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double n = norm2(m.row(r));
    if (!(n > kMinRowNorm))
      throw PreconditionError("l2_normalize_rows: row " + std::to_string(r) + " has norm " + std::to_string(n));
    auto src = m.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / n;
    if (norms_out) (*norms_out)[r] = n;
  }
  return out;
}

/// Vector-Jacobian product of row normalization: given y = x/|x| (per row),
/// the row norms |x| and dL/dy, returns dL/dx = (g - y (y.g)) / |x|.
inline Matrix l2_normalize_rows_vjp(const Matrix& normalized, std::span<const double> norms, const Matrix& grad_out) {
  require_shape(normalized.same_shape(grad_out), "l2_normalize_rows_vjp: shape mismatch");
  require_shape(norms.size() == normalized.rows(), "l2_normalize_rows_vjp: norms length mismatch");
  Matrix gx(normalized.rows(), normalized.cols());
  for (std::size_t r = 0; r < normalized.rows(); ++r) {
    auto y = normalized.row(r);
    auto g = grad_out.row(r);
    double yg = dot(y, g);
    auto dst = gx.row(r);
    for (std::size_t c = 0; c < y.size(); ++c) dst[c] = (g[c] - y[c] * yg) / norms[r];
  }
  return gx;
}

}  // namespace semrel
