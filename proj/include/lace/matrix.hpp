#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lace {

/// Dense row-major matrix of doubles. Batches are stored as
/// (batch_size x features), so a sample is a contiguous row.
/// Matrices are plain values: copy freely, share const references
/// across threads, mutate only what you own.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("Matrix: dimensions must be positive, got " +
                                  shape_string(rows, cols));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) {
    return std::span<double>(data_.data() + r * cols_, cols_);
  }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_.data() + r * cols_, cols_);
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool operator==(const Matrix& other) const = default;

  static std::string shape_string(std::size_t r, std::size_t c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
  }
  std::string shape_string() const { return shape_string(rows_, cols_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {
inline void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) {
    throw std::runtime_error(std::string(op) + " produced non-finite values");
  }
}
}  // namespace detail

/// Standard matrix product, (m x k) * (k x n) -> (m x n).
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: incompatible shapes " + a.shape_string() +
                                " x " + b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.data() + i * out.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* b_row = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out_row[j] += aik * b_row[j];
      }
    }
  }
  detail::require_finite(out, "matmul");
  return out;
}

/// a^T * b without materializing the transpose: (m x k)^T * (m x n) -> (k x n).
inline Matrix matmul_transpose_a(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_transpose_a: incompatible shapes " +
                                a.shape_string() + "^T x " + b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* a_row = a.data() + r * a.cols();
    const double* b_row = b.data() + r * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a_row[i];
      double* out_row = out.data() + i * out.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) {
        out_row[j] += ari * b_row[j];
      }
    }
  }
  detail::require_finite(out, "matmul_transpose_a");
  return out;
}

/// a * b^T without materializing the transpose: (m x k) * (n x k)^T -> (m x n).
inline Matrix matmul_transpose_b(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transpose_b: incompatible shapes " +
                                a.shape_string() + " x " + b.shape_string() + "^T");
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.data() + j * b.cols();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) {
        acc += a_row[k] * b_row[k];
      }
      out(i, j) = acc;
    }
  }
  detail::require_finite(out, "matmul_transpose_b");
  return out;
}

}  // namespace lace
