#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "own/linalg/decompositions.hpp"
#include "own/linalg/matrix.hpp"

namespace own::olm {

// Which orthogonalizing map is applied to the centered proxy rows.
enum class OrthKind {
  minimal_distortion,  // P* = D·Λ^{-1/2}·Dᵀ, the symmetric inverse square root
  eigenbasis,          // P_var = Λ^{-1/2}·Dᵀ, orthonormal but not distortion-minimizing
};

// Ridge added to the row covariance before decomposition: Σ ← Σ + ε·I.
// Relative mode uses ε = coefficient·tr(Σ)/n, which keeps the transform exactly
// invariant to positive rescaling of V.
struct Ridge {
  double coefficient = 0.0;
  bool relative = true;

  static Ridge none() { return {0.0, true}; }
  static Ridge relative_to_trace(double c) { return {c, true}; }
  static Ridge absolute(double eps) { return {eps, false}; }
};

struct Centered {
  Matrix v_c;              // V − c·1ᵀ
  std::vector<double> c;   // row means
};

Centered center(const Matrix& v);

// Everything the backward pass of one group needs.
struct GroupCache {
  OrthKind kind = OrthKind::minimal_distortion;
  std::vector<double> c;
  Matrix v_c;
  Matrix sigma;        // post-ridge covariance, exactly symmetric
  EigPair eig;
  Matrix w;
  double eps = 0.0;          // ridge actually added
  double ridge_slope = 0.0;  // dε/d tr(V_c·V_cᵀ); zero for absolute ridges
};

// W = D·Λ^{-1/2}·Dᵀ·(V − c·1ᵀ).
// Throws DimensionError when rows > cols, RankError when rows == cols (centered
// rows span at most cols−1 dimensions) or when the regularized covariance has
// its smallest eigenvalue below 1e-14 of the largest.
GroupCache orth_transform(const Matrix& v, Ridge ridge = {});

// W = Λ^{-1/2}·Dᵀ·(V − c·1ᵀ). Same errors as orth_transform.
GroupCache orth_transform_var(const Matrix& v, Ridge ridge = {});

GroupCache orthogonalize(const Matrix& v, OrthKind kind, Ridge ridge = {});

// tr((w − v_c)(w − v_c)ᵀ)
double distortion(const Matrix& w, const Matrix& v_c);

// True when no trial rotation Q (n×n, drawn from the seed) brings Q·w_star
// closer to v_c than w_star itself, up to 1e-9.
bool min_distortion_check(const Matrix& v_c, const Matrix& w_star, std::size_t trials,
                          std::uint64_t seed = 0);

// Backward through one group: given ∂L/∂W, returns ∂L/∂V.
// Intermediates follow the order ∂L/∂Λ, ∂L/∂D, ∂L/∂Σ, ∂L/∂c, ∂L/∂V.
Matrix olm_backward_group(const Matrix& dL_dW, const GroupCache& cache);

// Eigenvalue-gap matrix with K_ij = 1/(σ_i − σ_j) when the gap exceeds
// 1e-6·σ_max and 0 otherwise (including the diagonal).
Matrix eigengap_matrix(const std::vector<double>& values);

// ½(a + aᵀ)
Matrix symmetrize(const Matrix& a);

}  // namespace own::olm
