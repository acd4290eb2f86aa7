#include "own/linalg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "own/errors.hpp"

namespace own {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " +
                         shape(b));
  }
}

// c (m×n) += a (m×k) · b (k×n), all row-major with explicit leading dimensions.
// Tiled over k and n so a panel of b stays cache resident while every row of a
// streams past it; four rows of c are updated per load of b.
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, const double* a,
                     std::size_t lda, const double* b, std::size_t ldb, double* c,
                     std::size_t ldc) {
  constexpr std::size_t kTileK = 128;
  constexpr std::size_t kTileN = 256;
  for (std::size_t k0 = 0; k0 < k; k0 += kTileK) {
    const std::size_t k1 = std::min(k, k0 + kTileK);
    for (std::size_t j0 = 0; j0 < n; j0 += kTileN) {
      const std::size_t j1 = std::min(n, j0 + kTileN);
      const std::size_t width = j1 - j0;
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        double* __restrict c0 = c + (i + 0) * ldc + j0;
        double* __restrict c1 = c + (i + 1) * ldc + j0;
        double* __restrict c2 = c + (i + 2) * ldc + j0;
        double* __restrict c3 = c + (i + 3) * ldc + j0;
        for (std::size_t p = k0; p < k1; ++p) {
          const double a0 = a[(i + 0) * lda + p];
          const double a1 = a[(i + 1) * lda + p];
          const double a2 = a[(i + 2) * lda + p];
          const double a3 = a[(i + 3) * lda + p];
          const double* __restrict bp = b + p * ldb + j0;
          for (std::size_t j = 0; j < width; ++j) {
            const double bv = bp[j];
            c0[j] += a0 * bv;
            c1[j] += a1 * bv;
            c2[j] += a2 * bv;
            c3[j] += a3 * bv;
          }
        }
      }
      for (; i < m; ++i) {
        double* __restrict ci = c + i * ldc + j0;
        for (std::size_t p = k0; p < k1; ++p) {
          const double av = a[i * lda + p];
          const double* __restrict bp = b + p * ldb + j0;
          for (std::size_t j = 0; j < width; ++j) ci[j] += av * bp[j];
        }
      }
    }
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  if (!all_finite(std::span<const double>(data_))) {
    throw ValueError("Matrix: non-finite entry in input data");
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
  if (first + count > rows_) throw DimensionError("Matrix::row_block: out of range");
  Matrix out;
  out.rows_ = count;
  out.cols_ = cols_;
  out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
                   data_.begin() + static_cast<std::ptrdiff_t>((first + count) * cols_));
  return out;
}

void Matrix::set_row_block(std::size_t first, const Matrix& block) {
  if (block.cols_ != cols_ || first + block.rows_ > rows_) {
    throw DimensionError("Matrix::set_row_block: block " + shape(block) +
                         " does not fit at row " + std::to_string(first) + " of " +
                         shape(*this));
  }
  std::copy(block.data_.begin(), block.data_.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(first * cols_));
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape("add", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape("subtract", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix add(const Matrix& a, const Matrix& b) { return a + b; }
Matrix scale(const Matrix& a, double s) { return s * a; }

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kBlock) {
    const std::size_t i1 = std::min(a.rows(), i0 + kBlock);
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kBlock) {
      const std::size_t j1 = std::min(a.cols(), j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i)
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
    }
  }
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape(a) + " * " + shape(b));
  }
  Matrix c(a.rows(), b.cols());
  if (c.empty() || a.cols() == 0) return c;
  gemm_accumulate(a.rows(), b.cols(), a.cols(), a.data().data(), a.cols(),
                  b.data().data(), b.cols(), c.data().data(), c.cols());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + shape(a) + "ᵀ * " + shape(b));
  }
  return matmul(transpose(a), b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + shape(a) + " * " + shape(b) + "ᵀ");
  }
  return matmul(a, transpose(b));
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
  return c;
}

double trace(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("trace: non-square " + shape(a));
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double x : a.data()) s += x * x;
  return std::sqrt(s);
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(const Matrix& a) { return all_finite(a.data()); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double row_orthonormality_error(const Matrix& a) {
  return frobenius_norm(matmul_nt(a, a) - Matrix::identity(a.rows()));
}

double column_orthonormality_error(const Matrix& a) {
  return frobenius_norm(matmul_tn(a, a) - Matrix::identity(a.cols()));
}

}  // namespace own
