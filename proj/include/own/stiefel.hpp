#pragma once

#include <string_view>

#include "own/linalg/matrix.hpp"

// Riemannian baselines on the Stiefel manifold. The update formulas are written
// for column-orthonormal points (Wᵀ·W = I, n ≥ d); layers store row-orthonormal
// weights (W·Wᵀ = I, n ≤ d). Every public function accepts either convention
// and returns results in the convention of its input state.
namespace own::stiefel {

enum class Convention { row_orthonormal, column_orthonormal };

struct StiefelState {
  Matrix w;
  Convention convention = Convention::column_orthonormal;
};

// Validates orthonormality within 1e-8 (ValueError otherwise).
StiefelState make_state(Matrix w, Convention convention);

double orthonormality_error(const StiefelState& state);

// G − W·Gᵀ·W
Matrix riem_grad_euclidean(const StiefelState& state, const Matrix& g);

// G − ½(W·Wᵀ·G + W·Gᵀ·W)
Matrix riem_grad_canonical(const StiefelState& state, const Matrix& g);

// qf(W − lr·direction)
StiefelState qr_retraction_step(const StiefelState& state, const Matrix& direction,
                                double lr);

// Skew generator A = G·Wᵀ − W·Gᵀ in column convention (equivalently
// Gᵀ·W − Wᵀ·G for a row-orthonormal W). Square in the larger dimension.
Matrix cayley_generator(const StiefelState& state, const Matrix& g);

// (I + lr/2·A)^{-1}(I − lr/2·A)·W, evaluated through the low-rank form
// A = U·Vᵀ, U = [G, W], V = [W, −G], so only a 2p×2p system is solved
// (p = the smaller dimension).
StiefelState cayley_step(const StiefelState& state, const Matrix& g, double lr);

// Same update with A formed explicitly and the full system solved; reference
// route for small problems.
StiefelState cayley_step_dense(const StiefelState& state, const Matrix& g, double lr);

// Euclidean step on the raw gradient followed by qf.
StiefelState qr_projection_step(const StiefelState& state, const Matrix& g, double lr);

enum class Method { euclidean_qr, canonical_qr, cayley, qr_projection };

std::string_view method_name(Method m);

StiefelState step(Method method, const StiefelState& state, const Matrix& g, double lr);

}  // namespace own::stiefel
