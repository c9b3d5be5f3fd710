// Dense double-precision vector/matrix primitives plus the numerically
// stable kernels (log-sum-exp, softmax, Jacobi eigensolver, PCA) everything
// else is built on. All functions are pure.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "schane/error.hpp"

namespace schane::numerics {

using Vector = std::vector<double>;

// Shortest representation that round-trips the exact double.
inline std::string format_full(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

inline void require_finite(const Vector& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) fail(ErrorKind::NumericError, std::string(what) + ": non-finite value");
}

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) fail(ErrorKind::ShapeError, "matrix dimensions must be positive");
    if (!std::isfinite(fill)) fail(ErrorKind::NumericError, "matrix fill must be finite");
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows == 0 || cols == 0) fail(ErrorKind::ShapeError, "matrix dimensions must be positive");
    if (data_.size() != rows * cols) fail(ErrorKind::ShapeError, "matrix data size mismatch");
    for (double x : data_)
      if (!std::isfinite(x)) fail(ErrorKind::NumericError, "matrix values must be finite");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows)
      : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    if (rows_ == 0 || cols_ == 0) fail(ErrorKind::ShapeError, "matrix dimensions must be positive");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) fail(ErrorKind::ShapeError, "ragged initializer");
      for (double x : r) {
        if (!std::isfinite(x)) fail(ErrorKind::NumericError, "matrix values must be finite");
        data_.push_back(x);
      }
    }
  }

  static Matrix from_rows(const std::vector<Vector>& rows) {
    if (rows.empty() || rows.front().empty())
      fail(ErrorKind::ShapeError, "matrix dimensions must be positive");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) fail(ErrorKind::ShapeError, "ragged rows");
      require_finite(rows[i], "matrix row");
      std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * m.cols_));
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
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }
  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }

  Vector row(std::size_t i) const {
    return Vector(row_ptr(i), row_ptr(i) + cols_);
  }

  void set_row(std::size_t i, const Vector& v) {
    if (v.size() != cols_) fail(ErrorKind::ShapeError, "row length mismatch");
    std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// ---- elementwise helpers -------------------------------------------------

inline void axpy(double a, const Matrix& x, Matrix& y) {
  if (!x.same_shape(y)) fail(ErrorKind::ShapeError, "axpy shape mismatch");
  for (std::size_t i = 0; i < y.data().size(); ++i) y.data()[i] += a * x.data()[i];
}

inline void scale(Matrix& m, double a) {
  for (double& x : m.data()) x *= a;
}

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) fail(ErrorKind::ShapeError, "dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorKind::ShapeError, "matmul inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row_ptr(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* bk = b.row_ptr(k);
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

// C = A * B^T
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) fail(ErrorKind::ShapeError, "matmul_bt dimension mismatch");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      c(i, j) = dot(a.row_ptr(i), b.row_ptr(j), a.cols());
  return c;
}

// C = A^T * B
inline Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorKind::ShapeError, "matmul_at dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.row_ptr(k);
    const double* bk = b.row_ptr(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double* ci = c.row_ptr(i);
      const double aki = ak[i];
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

// ---- spec operations -------------------------------------------------------

// Unit-norm copy of v. Zero vectors cannot be normalised.
inline Vector l2_normalize(const Vector& v) {
  const double n = norm(v);
  if (!(n > 0.0)) fail(ErrorKind::DegenerateVector, "cannot normalise zero vector");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

// log(sum exp(x_i)), shift-invariant.
inline double log_sum_exp(const Vector& xs) {
  if (xs.empty()) fail(ErrorKind::EmptyInput, "log_sum_exp of empty vector");
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline Vector softmax(const Vector& xs) {
  if (xs.empty()) fail(ErrorKind::EmptyInput, "softmax of empty vector");
  const double m = *std::max_element(xs.begin(), xs.end());
  Vector out(xs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(xs[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

struct EigenResult {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // columns match eigenvalues
};

// Cyclic Jacobi for symmetric matrices. Off-diagonal Frobenius norm below
// 1e-10 terminates; matrices here stay small (<= embedding dim).
inline EigenResult symmetric_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) fail(ErrorKind::ShapeError, "eigen requires a square matrix");
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-9)
        fail(ErrorKind::ShapeError, "eigen requires a symmetric matrix");

  Matrix a = m;
  Matrix v = Matrix::identity(n);
  const double tol = 1e-10;
  const int max_sweeps = 100;

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenResult res{Vector(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    res.eigenvalues[j] = a(src, src);
    // Deterministic sign: largest-magnitude component positive.
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (std::abs(v(k, src)) > best) {
        best = std::abs(v(k, src));
        arg = k;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t k = 0; k < n; ++k) res.eigenvectors(k, j) = sign * v(k, src);
  }
  return res;
}

// Rows centred and projected onto the top `dims` principal directions.
inline Matrix pca_project(const Matrix& rows, std::size_t dims) {
  if (dims > rows.cols()) fail(ErrorKind::ShapeError, "pca dims exceed column count");
  if (dims == 0) fail(ErrorKind::ShapeError, "pca dims must be positive");
  if (rows.rows() < 2) fail(ErrorKind::ShapeError, "pca needs at least 2 rows");

  Matrix centered = rows;
  for (std::size_t j = 0; j < rows.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) mean += rows(i, j);
    mean /= static_cast<double>(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) centered(i, j) -= mean;
  }

  Matrix cov = matmul_at(centered, centered);
  scale(cov, 1.0 / static_cast<double>(rows.rows() - 1));
  // Symmetrise round-off before the eigensolver's symmetry gate.
  for (std::size_t i = 0; i < cov.rows(); ++i)
    for (std::size_t j = i + 1; j < cov.cols(); ++j) {
      const double avg = 0.5 * (cov(i, j) + cov(j, i));
      cov(i, j) = avg;
      cov(j, i) = avg;
    }
  const EigenResult eig = symmetric_eigen(cov);

  Matrix proj(rows.rows(), dims);
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < dims; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < rows.cols(); ++k) s += centered(i, k) * eig.eigenvectors(k, j);
      proj(i, j) = s;
    }
  return proj;
}

}  // namespace schane::numerics
