#include "own/stiefel.hpp"

#include <algorithm>
#include <string>

#include "own/errors.hpp"
#include "own/linalg/decompositions.hpp"

namespace own::stiefel {

namespace {

Matrix to_column(const Matrix& m, Convention c) {
  return c == Convention::row_orthonormal ? transpose(m) : m;
}

Matrix from_column(Matrix m, Convention c) {
  return c == Convention::row_orthonormal ? transpose(m) : m;
}

void require_shape(const char* op, const StiefelState& s, const Matrix& g) {
  if (g.rows() != s.w.rows() || g.cols() != s.w.cols()) {
    throw DimensionError(std::string(op) + ": gradient is " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + ", point is " +
                         std::to_string(s.w.rows()) + "x" + std::to_string(s.w.cols()));
  }
}

// Horizontal concatenation [a, b].
Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = out.row(i);
    auto ar = a.row(i);
    auto br = b.row(i);
    std::copy(ar.begin(), ar.end(), r.begin());
    std::copy(br.begin(), br.end(), r.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

}  // namespace

StiefelState make_state(Matrix w, Convention convention) {
  StiefelState s{std::move(w), convention};
  const double err = orthonormality_error(s);
  if (!(err <= 1e-8)) {
    throw ValueError("make_state: point is not orthonormal (residual " + std::to_string(err) +
                     ")");
  }
  return s;
}

double orthonormality_error(const StiefelState& state) {
  return state.convention == Convention::row_orthonormal
             ? row_orthonormality_error(state.w)
             : column_orthonormality_error(state.w);
}

Matrix riem_grad_euclidean(const StiefelState& state, const Matrix& g) {
  require_shape("riem_grad_euclidean", state, g);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix gc = to_column(g, state.convention);
  return from_column(gc - matmul(x, matmul_tn(gc, x)), state.convention);
}

Matrix riem_grad_canonical(const StiefelState& state, const Matrix& g) {
  require_shape("riem_grad_canonical", state, g);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix gc = to_column(g, state.convention);
  // W·Wᵀ·G + W·Gᵀ·W = W·(Wᵀ·G + Gᵀ·W)
  const Matrix xtg = matmul_tn(x, gc);
  const Matrix inner = xtg + transpose(xtg);
  return from_column(gc - scale(matmul(x, inner), 0.5), state.convention);
}

StiefelState qr_retraction_step(const StiefelState& state, const Matrix& direction,
                                double lr) {
  require_shape("qr_retraction_step", state, direction);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix z = to_column(direction, state.convention);
  return {from_column(qr_unique(x - lr * z).q, state.convention), state.convention};
}

Matrix cayley_generator(const StiefelState& state, const Matrix& g) {
  require_shape("cayley_generator", state, g);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix gc = to_column(g, state.convention);
  return matmul_nt(gc, x) - matmul_nt(x, gc);
}

StiefelState cayley_step(const StiefelState& state, const Matrix& g, double lr) {
  require_shape("cayley_step", state, g);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix gc = to_column(g, state.convention);
  const Matrix u = hstack(gc, x);
  const Matrix v = hstack(x, scale(gc, -1.0));
  // Y = X − lr·U·(I + lr/2·Vᵀ·U)^{-1}·Vᵀ·X
  Matrix system = matmul_tn(v, u);
  system *= 0.5 * lr;
  for (std::size_t i = 0; i < system.rows(); ++i) system(i, i) += 1.0;
  const Matrix coeff = solve_small(system, matmul_tn(v, x));
  Matrix y = x - lr * matmul(u, coeff);
  return {from_column(std::move(y), state.convention), state.convention};
}

StiefelState cayley_step_dense(const StiefelState& state, const Matrix& g, double lr) {
  const Matrix a = cayley_generator(state, g);
  const Matrix x = to_column(state.w, state.convention);
  const Matrix eye = Matrix::identity(a.rows());
  const Matrix lhs = eye + (0.5 * lr) * a;
  const Matrix rhs = matmul(eye - (0.5 * lr) * a, x);
  return {from_column(solve_small(lhs, rhs), state.convention), state.convention};
}

StiefelState qr_projection_step(const StiefelState& state, const Matrix& g, double lr) {
  require_shape("qr_projection_step", state, g);
  return qr_retraction_step(state, g, lr);
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::euclidean_qr: return "ei_qr";
    case Method::canonical_qr: return "ci_qr";
    case Method::cayley: return "cayt";
    case Method::qr_projection: return "qr_proj";
  }
  return "unknown";
}

StiefelState step(Method method, const StiefelState& state, const Matrix& g, double lr) {
  switch (method) {
    case Method::euclidean_qr:
      return qr_retraction_step(state, riem_grad_euclidean(state, g), lr);
    case Method::canonical_qr:
      return qr_retraction_step(state, riem_grad_canonical(state, g), lr);
    case Method::cayley:
      return cayley_step(state, g, lr);
    case Method::qr_projection:
      return qr_projection_step(state, g, lr);
  }
  throw ValueError("stiefel::step: unknown method");
}

}  // namespace own::stiefel
