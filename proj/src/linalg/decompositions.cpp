#include "own/linalg/decompositions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "own/errors.hpp"

namespace own {

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Zeroes a(p,q) with the rotation Jᵀ·a·J and accumulates v ← v·J.
void jacobi_rotate(Matrix& a, Matrix& v, std::size_t p, std::size_t q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double app = a(p, p);
  const double aqq = a(q, q);
  const double theta = (aqq - app) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 1.0 / (2.0 * theta);
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    if (k == p || k == q) continue;
    const double akp = a(k, p);
    const double akq = a(k, q);
    const double new_kp = c * akp - s * akq;
    const double new_kq = s * akp + c * akq;
    a(k, p) = new_kp;
    a(p, k) = new_kp;
    a(k, q) = new_kq;
    a(q, k) = new_kq;
  }
  a(p, p) = app - t * apq;
  a(q, q) = aqq + t * apq;
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    const double vkp = v(k, p);
    const double vkq = v(k, q);
    v(k, p) = c * vkp - s * vkq;
    v(k, q) = s * vkp + c * vkq;
  }
}

}  // namespace

EigPair sym_eig(const Matrix& s, const JacobiOptions& options) {
  if (s.rows() != s.cols()) {
    throw DimensionError("sym_eig: matrix is " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + ", expected square");
  }
  if (!all_finite(s)) throw ValueError("sym_eig: non-finite entry");

  const std::size_t n = s.rows();
  const double norm = frobenius_norm(s);
  Matrix a(n, n);
  double asymmetry = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = 0.5 * (s(i, j) + s(j, i));
      asymmetry = std::max(asymmetry, std::abs(s(i, j) - s(j, i)));
    }
  }
  if (asymmetry > 1e-10 * (1.0 + norm)) {
    throw ValueError("sym_eig: input is not symmetric (max asymmetry " +
                     std::to_string(asymmetry) + ")");
  }

  Matrix v = Matrix::identity(n);
  const double threshold = options.relative_tolerance * norm;
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= threshold) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) jacobi_rotate(a, v, p, q);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigPair out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values[k] = a(src, src);
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v(i, src)) > std::abs(v(argmax, src))) argmax = i;
    const double sign = v(argmax, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * v(i, src);
  }
  return out;
}

QrPair qr_unique(const Matrix& a) {
  const std::size_t n = a.rows();
  const std::size_t d = a.cols();
  if (n < d) {
    throw DimensionError("qr_unique: need rows >= cols, got " + std::to_string(n) + "x" +
                         std::to_string(d));
  }
  if (!all_finite(a)) throw ValueError("qr_unique: non-finite entry");

  const double tol = 1e-12 * frobenius_norm(a);
  Matrix r = a;
  // Householder vectors, stored unit-norm; an empty vector means "no reflection".
  std::vector<std::vector<double>> reflectors(d);

  for (std::size_t k = 0; k < d; ++k) {
    double tail = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) tail += r(i, k) * r(i, k);
    const double x0 = r(k, k);
    const double norm_x = std::sqrt(x0 * x0 + tail);
    if (norm_x <= tol) {
      throw RankError("qr_unique: column " + std::to_string(k) +
                          " is linearly dependent on the preceding columns",
                      k);
    }
    if (tail == 0.0) continue;

    const double alpha = x0 >= 0.0 ? -norm_x : norm_x;
    std::vector<double> hv(n - k);
    hv[0] = x0 - alpha;
    for (std::size_t i = k + 1; i < n; ++i) hv[i - k] = r(i, k);
    double hv_norm = 0.0;
    for (double x : hv) hv_norm += x * x;
    hv_norm = std::sqrt(hv_norm);
    for (double& x : hv) x /= hv_norm;

    for (std::size_t j = k; j < d; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += hv[i - k] * r(i, j);
      for (std::size_t i = k; i < n; ++i) r(i, j) -= 2.0 * dot * hv[i - k];
    }
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
    reflectors[k] = std::move(hv);
  }

  // Q = H_0·H_1·…·H_{d-1} applied to the first d columns of the identity.
  Matrix q(n, d);
  for (std::size_t j = 0; j < d; ++j) q(j, j) = 1.0;
  for (std::size_t kk = d; kk-- > 0;) {
    const auto& hv = reflectors[kk];
    if (hv.empty()) continue;
    for (std::size_t j = 0; j < d; ++j) {
      double dot = 0.0;
      for (std::size_t i = kk; i < n; ++i) dot += hv[i - kk] * q(i, j);
      if (dot == 0.0) continue;
      for (std::size_t i = kk; i < n; ++i) q(i, j) -= 2.0 * dot * hv[i - kk];
    }
  }

  QrPair out{std::move(q), Matrix(d, d)};
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out.r(i, j) = r(i, j);

  for (std::size_t k = 0; k < d; ++k) {
    if (std::abs(out.r(k, k)) <= tol) {
      throw RankError("qr_unique: column " + std::to_string(k) +
                          " is linearly dependent on the preceding columns",
                      k);
    }
    if (out.r(k, k) < 0.0) {
      for (std::size_t j = k; j < d; ++j) out.r(k, j) = -out.r(k, j);
      for (std::size_t i = 0; i < n; ++i) out.q(i, k) = -out.q(i, k);
    }
  }
  return out;
}

Matrix solve_small(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("solve_small: coefficient matrix not square");
  if (b.rows() != n) {
    throw DimensionError("solve_small: right-hand side has " + std::to_string(b.rows()) +
                         " rows, expected " + std::to_string(n));
  }
  const double tol = 1e-12 * frobenius_norm(a);
  Matrix lu = a;
  Matrix x = b;
  const std::size_t m = b.cols();

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(lu(i, k)) > std::abs(lu(pivot, k))) pivot = i;
    if (!(std::abs(lu(pivot, k)) > tol)) {
      throw SingularityError("solve_small: pivot " + std::to_string(k) +
                             " below tolerance; matrix is singular or ill-conditioned");
    }
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(pivot, j));
      for (std::size_t j = 0; j < m; ++j) std::swap(x(k, j), x(pivot, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / lu(k, k);
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(k, j);
      for (std::size_t i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
      x(k, j) = s / lu(k, k);
    }
  }
  return x;
}

}  // namespace own
