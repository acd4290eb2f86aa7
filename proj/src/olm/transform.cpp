#include "own/olm/transform.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "own/errors.hpp"
#include "own/random.hpp"

namespace own::olm {

namespace {

double inv_sqrt(double x) { return 1.0 / std::sqrt(x); }

// diag(f)·a
Matrix scale_rows(Matrix a, const std::vector<double>& f) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double& x : a.row(i)) x *= f[i];
  return a;
}

// a·diag(f)
Matrix scale_cols(Matrix a, const std::vector<double>& f) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= f[j];
  }
  return a;
}

}  // namespace

Centered center(const Matrix& v) {
  if (v.cols() == 0) throw DimensionError("center: matrix has no columns");
  Centered out{v, std::vector<double>(v.rows())};
  const double d = static_cast<double>(v.cols());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    auto r = out.v_c.row(i);
    double sum = 0.0;
    for (double x : r) sum += x;
    const double mean = sum / d;
    out.c[i] = mean;
    for (double& x : r) x -= mean;
  }
  return out;
}

Matrix symmetrize(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("symmetrize: non-square matrix");
  Matrix s(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      s(i, j) = v;
      s(j, i) = v;
    }
  return s;
}

GroupCache orthogonalize(const Matrix& v, OrthKind kind, Ridge ridge) {
  const std::size_t n = v.rows();
  const std::size_t d = v.cols();
  if (n == 0 || d == 0) throw DimensionError("orth_transform: empty proxy matrix");
  if (n > d) {
    throw DimensionError("orth_transform: " + std::to_string(n) + " rows exceed " +
                         std::to_string(d) + " columns; split the rows into groups");
  }
  if (n == d) {
    throw RankError("orth_transform: " + std::to_string(n) +
                        " centered rows cannot be independent in " + std::to_string(d) +
                        " dimensions (centering removes one); use groups of at most " +
                        std::to_string(d - 1) + " rows",
                    n - 1);
  }
  if (!all_finite(v)) throw ValueError("orth_transform: non-finite proxy parameter");
  if (ridge.coefficient < 0.0) throw ValueError("orth_transform: negative ridge");

  GroupCache cache;
  cache.kind = kind;
  auto centered = center(v);
  cache.c = std::move(centered.c);
  cache.v_c = std::move(centered.v_c);

  Matrix sigma = symmetrize(matmul_nt(cache.v_c, cache.v_c));
  if (ridge.relative) {
    cache.ridge_slope = ridge.coefficient / static_cast<double>(n);
    cache.eps = cache.ridge_slope * trace(sigma);
  } else {
    cache.eps = ridge.coefficient;
  }
  for (std::size_t i = 0; i < n; ++i) sigma(i, i) += cache.eps;
  cache.sigma = std::move(sigma);

  cache.eig = sym_eig(cache.sigma);
  const double largest = cache.eig.values.front();
  const double smallest = cache.eig.values.back();
  if (!(largest > 0.0) || smallest < 1e-14 * largest) {
    throw RankError("orth_transform: row covariance is numerically singular (eigenvalues " +
                        std::to_string(smallest) + " .. " + std::to_string(largest) + ")",
                    n - 1);
  }

  std::vector<double> inv_root(n);
  for (std::size_t i = 0; i < n; ++i) inv_root[i] = inv_sqrt(cache.eig.values[i]);
  // Dᵀ·V_c, then Λ^{-1/2}; P* additionally rotates back by D.
  Matrix projected = scale_rows(matmul_tn(cache.eig.vectors, cache.v_c), inv_root);
  cache.w = kind == OrthKind::minimal_distortion ? matmul(cache.eig.vectors, projected)
                                                 : std::move(projected);
  return cache;
}

GroupCache orth_transform(const Matrix& v, Ridge ridge) {
  return orthogonalize(v, OrthKind::minimal_distortion, ridge);
}

GroupCache orth_transform_var(const Matrix& v, Ridge ridge) {
  return orthogonalize(v, OrthKind::eigenbasis, ridge);
}

double distortion(const Matrix& w, const Matrix& v_c) {
  const Matrix diff = w - v_c;
  double s = 0.0;
  for (double x : diff.data()) s += x * x;
  return s;
}

bool min_distortion_check(const Matrix& v_c, const Matrix& w_star, std::size_t trials,
                          std::uint64_t seed) {
  if (v_c.rows() != w_star.rows() || v_c.cols() != w_star.cols()) {
    throw DimensionError("min_distortion_check: shape mismatch");
  }
  const double best = distortion(w_star, v_c);
  Rng rng = make_rng(seed, 0x6d696e64);
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix q = random_orthogonal(w_star.rows(), rng);
    if (distortion(matmul(q, w_star), v_c) < best - 1e-9) return false;
  }
  return true;
}

Matrix eigengap_matrix(const std::vector<double>& values) {
  const std::size_t n = values.size();
  double largest = 0.0;
  for (double s : values) largest = std::max(largest, std::abs(s));
  const double min_gap = 1e-6 * largest;
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double gap = values[i] - values[j];
      if (i != j && std::abs(gap) > min_gap) k(i, j) = 1.0 / gap;
    }
  return k;
}

Matrix olm_backward_group(const Matrix& dL_dW, const GroupCache& cache) {
  const Matrix& w = cache.w;
  const Matrix& d_mat = cache.eig.vectors;
  const std::vector<double>& sigma = cache.eig.values;
  const std::size_t n = w.rows();
  const std::size_t d = w.cols();
  if (dL_dW.rows() != n || dL_dW.cols() != d) {
    throw DimensionError("olm_backward_group: gradient shape does not match W");
  }

  std::vector<double> root(n), inv_root(n), inv(n);
  for (std::size_t i = 0; i < n; ++i) {
    root[i] = std::sqrt(sigma[i]);
    inv_root[i] = 1.0 / root[i];
    inv[i] = 1.0 / sigma[i];
  }

  const Matrix g_wt = matmul_nt(dL_dW, w);  // ∂L/∂W·Wᵀ, n×n

  // Diagonal of ∂L/∂Λ (off-diagonal entries are masked away below), ∂L/∂D, and
  // the transform P whose transpose carries ∂L/∂W straight through to V_c.
  std::vector<double> dL_dLambda(n);
  Matrix dL_dD;
  Matrix p;
  if (cache.kind == OrthKind::minimal_distortion) {
    // ∂L/∂Λ = −½·Dᵀ·∂L/∂W·Wᵀ·D·Λ^{-1}
    const Matrix dt_gwt_d = matmul(matmul_tn(d_mat, g_wt), d_mat);
    for (std::size_t i = 0; i < n; ++i) dL_dLambda[i] = -0.5 * dt_gwt_d(i, i) * inv[i];
    // ∂L/∂D = D·Λ^{1/2}·Dᵀ·W·∂L/∂Wᵀ·D·Λ^{-1/2} + ∂L/∂W·Wᵀ·D
    const Matrix sqrt_sigma = matmul_nt(scale_cols(d_mat, root), d_mat);
    dL_dD = scale_cols(matmul(matmul(sqrt_sigma, transpose(g_wt)), d_mat), inv_root);
    dL_dD += matmul(g_wt, d_mat);
    p = matmul_nt(scale_cols(d_mat, inv_root), d_mat);
  } else {
    // W = Λ^{-1/2}·Dᵀ·V_c
    for (std::size_t i = 0; i < n; ++i) dL_dLambda[i] = -0.5 * g_wt(i, i) * inv[i];
    dL_dD = scale_cols(matmul_nt(cache.v_c, dL_dW), inv_root);
    p = scale_rows(transpose(d_mat), inv_root);
  }

  // ∂L/∂Σ = D·((Kᵀ ⊙ Dᵀ·∂L/∂D) + (∂L/∂Λ)_diag)·Dᵀ
  const Matrix k = eigengap_matrix(sigma);
  Matrix inner = hadamard(transpose(k), matmul_tn(d_mat, dL_dD));
  for (std::size_t i = 0; i < n; ++i) inner(i, i) += dL_dLambda[i];
  const Matrix dL_dSigma = matmul_nt(matmul(d_mat, inner), d_mat);

  Matrix dL_dSigma_s = symmetrize(dL_dSigma);
  if (cache.ridge_slope != 0.0) {
    // ε = slope·tr(V_c·V_cᵀ) feeds back into V_c like Σ itself does.
    const double t = cache.ridge_slope * trace(dL_dSigma_s);
    for (std::size_t i = 0; i < n; ++i) dL_dSigma_s(i, i) += t;
  }

  // ∂L/∂c = −Pᵀ·∂L/∂W·1 − 2·(∂L/∂Σ)_s·V_c·1   (column form of the row vector)
  const Matrix direct = matmul_tn(p, dL_dW);  // Pᵀ·∂L/∂W
  const Matrix sigma_path = scale(matmul(dL_dSigma_s, cache.v_c), 2.0);
  std::vector<double> dL_dc(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += direct(i, j) + sigma_path(i, j);
    dL_dc[i] = -s;
  }

  // ∂L/∂V = Pᵀ·∂L/∂W + 2·(∂L/∂Σ)_s·V_c + (1/d)·∂L/∂c·1ᵀ
  Matrix dL_dV = direct + sigma_path;
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double shift = dL_dc[i] * inv_d;
    for (double& x : dL_dV.row(i)) x += shift;
  }
  return dL_dV;
}

}  // namespace own::olm
