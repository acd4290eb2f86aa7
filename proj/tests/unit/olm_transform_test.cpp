#include <gtest/gtest.h>

#include <cmath>

#include "own/errors.hpp"
#include "own/gradcheck.hpp"
#include "own/olm/transform.hpp"
#include "own/random.hpp"
#include "support/eigen_bridge.hpp"

namespace own::olm {
namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

double linear_loss(const Matrix& v, const Matrix& r, OrthKind kind, Ridge ridge = {}) {
  return check::inner(orthogonalize(v, kind, ridge).w, r);
}

TEST(Center, OneRowMeanRemoval) {
  const Centered c = center(Matrix::from_rows({{3, 1}}));
  EXPECT_EQ(c.v_c, Matrix::from_rows({{1, -1}}));
  ASSERT_EQ(c.c.size(), 1u);
  EXPECT_DOUBLE_EQ(c.c[0], 2.0);
}

TEST(Center, ZeroMatrix) {
  const Centered c = center(Matrix(2, 3));
  EXPECT_EQ(c.v_c, Matrix(2, 3));
  EXPECT_EQ(c.c, std::vector<double>(2, 0.0));
}

TEST(Center, RowSumsVanish) {
  Rng rng = make_rng(21);
  const Centered c = center(gaussian_matrix(4, 7, rng));
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (double x : c.v_c.row(i)) s += x;
    EXPECT_LT(std::abs(s), 1e-12);
  }
}

TEST(OrthTransform, CenteredOrthonormalInputIsFixed) {
  const double a = kInvSqrt2, b = 1.0 / std::sqrt(6.0);
  const Matrix v = Matrix::from_rows({{a, -a, 0}, {b, b, -2 * b}});
  const GroupCache gc = orth_transform(v);
  EXPECT_LT(frobenius_norm(gc.w - v), 1e-12);
}

TEST(OrthTransform, SingleRowClosedForm) {
  const GroupCache gc = orth_transform(Matrix::from_rows({{3, 1}}));
  EXPECT_NEAR(gc.w(0, 0), kInvSqrt2, 1e-15);
  EXPECT_NEAR(gc.w(0, 1), -kInvSqrt2, 1e-15);
}

TEST(OrthTransform, MatchesIndependentWhitening) {
  Rng rng = make_rng(23);
  const Matrix v = gaussian_matrix(3, 5, rng);
  const GroupCache gc = orth_transform(v);
  EXPECT_LT(row_orthonormality_error(gc.w), 1e-8);
  EXPECT_LT(frobenius_norm(gc.w - testing::reference_whitening(v)), 1e-10);
}

TEST(OrthTransform, CacheInvariants) {
  Rng rng = make_rng(25);
  const GroupCache gc = orth_transform(gaussian_matrix(4, 9, rng));
  EXPECT_EQ(gc.sigma, transpose(gc.sigma));
  EXPECT_EQ(gc.c.size(), 4u);
  EXPECT_EQ(gc.eig.values.size(), 4u);
}

TEST(OrthTransform, Errors) {
  Rng rng = make_rng(27);
  EXPECT_THROW(orth_transform(gaussian_matrix(4, 3, rng)), DimensionError);
  // Centering leaves only d−1 directions, so n == d can never be orthonormal.
  EXPECT_THROW(orth_transform(gaussian_matrix(3, 3, rng)), RankError);
  EXPECT_THROW(orth_transform(Matrix::from_rows({{5}})), RankError);
  Matrix twin = gaussian_matrix(2, 6, rng);
  for (std::size_t j = 0; j < 6; ++j) twin(1, j) = twin(0, j);
  EXPECT_THROW(orth_transform(twin), RankError);
  EXPECT_THROW(orth_transform(Matrix(2, 5)), RankError);
}

TEST(OrthTransformVar, SingleRowCoincides) {
  const GroupCache gc = orth_transform_var(Matrix::from_rows({{3, 1}}));
  EXPECT_NEAR(gc.w(0, 0), kInvSqrt2, 1e-15);
  EXPECT_NEAR(gc.w(0, 1), -kInvSqrt2, 1e-15);
}

TEST(OrthTransformVar, OrthonormalButNotCloser) {
  Rng rng = make_rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix v = gaussian_matrix(2, 4, rng);
    const GroupCache var = orth_transform_var(v);
    const GroupCache best = orth_transform(v);
    EXPECT_LT(row_orthonormality_error(var.w), 1e-8);
    EXPECT_GE(distortion(var.w, var.v_c), distortion(best.w, best.v_c) - 1e-9);
  }
}

TEST(MinDistortion, SingleRow) {
  const GroupCache gc = orth_transform(Matrix::from_rows({{3, 1}}));
  EXPECT_TRUE(min_distortion_check(gc.v_c, gc.w, 100, 1));
}

TEST(MinDistortion, IdentityRotationIsExact) {
  Rng rng = make_rng(31);
  const GroupCache gc = orth_transform(gaussian_matrix(3, 6, rng));
  EXPECT_EQ(distortion(matmul(Matrix::identity(3), gc.w), gc.v_c), distortion(gc.w, gc.v_c));
}

TEST(MinDistortion, EigenbasisTransformIsBeaten) {
  Rng rng = make_rng(33);
  const GroupCache var = orth_transform_var(gaussian_matrix(3, 6, rng));
  EXPECT_FALSE(min_distortion_check(var.v_c, var.w, 1000, 2));
}

TEST(OrthTransform, PositiveScaleInvarianceAndNegation) {
  Rng rng = make_rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix v = gaussian_matrix(3, 7, rng);
    const Matrix w = orth_transform(v).w;
    for (double alpha : {1e-3, 0.5, 2.0, 1e3}) {
      EXPECT_LT(frobenius_norm(orth_transform(alpha * v).w - w), 1e-9);
      EXPECT_LT(frobenius_norm(orth_transform(-alpha * v).w + w), 1e-9);
    }
  }
}

TEST(OrthTransform, RotationEquivariance) {
  Rng rng = make_rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 4);
    const Matrix v = gaussian_matrix(n, n + 3, rng);
    const Matrix q = random_orthogonal(n, rng);
    EXPECT_LT(frobenius_norm(orth_transform(matmul(q, v)).w - matmul(q, orth_transform(v).w)),
              1e-8);
  }
}

TEST(OrthTransform, RelativeRidgeKeepsScaleInvariance) {
  Rng rng = make_rng(39);
  const Matrix v = gaussian_matrix(3, 6, rng);
  const Ridge ridge = Ridge::relative_to_trace(1e-7);
  const GroupCache gc = orth_transform(v, ridge);
  EXPECT_GT(gc.eps, 0.0);
  EXPECT_LT(frobenius_norm(orth_transform(4.0 * v, ridge).w - gc.w), 1e-9);
}

TEST(BackwardGroup, ZeroUpstreamGivesZero) {
  Rng rng = make_rng(41);
  const GroupCache gc = orth_transform(gaussian_matrix(3, 6, rng));
  EXPECT_EQ(max_abs(olm_backward_group(Matrix(3, 6), gc)), 0.0);
}

TEST(BackwardGroup, MatchesFiniteDifferencesOnLinearLoss) {
  Rng rng = make_rng(43);
  const Matrix v = gaussian_matrix(3, 6, rng);
  const Matrix r = gaussian_matrix(3, 6, rng);
  const Matrix analytic = olm_backward_group(r, orth_transform(v));
  const Matrix numeric = check::central_difference(
      [&](const Matrix& x) { return linear_loss(x, r, OrthKind::minimal_distortion); }, v);
  EXPECT_LT(check::max_relative_error(analytic, numeric), 1e-5);
}

TEST(BackwardGroup, DoublingInputHalvesGradient) {
  Rng rng = make_rng(45);
  const Matrix v = gaussian_matrix(3, 6, rng);
  const Matrix r = gaussian_matrix(3, 6, rng);
  const Matrix g1 = olm_backward_group(r, orth_transform(v));
  const Matrix g2 = olm_backward_group(r, orth_transform(2.0 * v));
  EXPECT_LT(frobenius_norm(2.0 * g2 - g1), 1e-10 * frobenius_norm(g1));
  const Matrix numeric = check::central_difference(
      [&](const Matrix& x) { return linear_loss(x, r, OrthKind::minimal_distortion); },
      2.0 * v);
  EXPECT_LT(check::max_relative_error(g2, numeric), 1e-5);
}

TEST(BackwardGroup, EigenbasisTransformMatchesFiniteDifferences) {
  Rng rng = make_rng(47);
  const Matrix v = gaussian_matrix(3, 7, rng);
  const Matrix r = gaussian_matrix(3, 7, rng);
  const Matrix analytic = olm_backward_group(r, orth_transform_var(v));
  const Matrix numeric = check::central_difference(
      [&](const Matrix& x) { return linear_loss(x, r, OrthKind::eigenbasis); }, v);
  EXPECT_LT(check::max_relative_error(analytic, numeric), 1e-5);
}

TEST(BackwardGroup, RidgeTermIsDifferentiatedToo) {
  Rng rng = make_rng(49);
  const Matrix v = gaussian_matrix(3, 5, rng);
  const Matrix r = gaussian_matrix(3, 5, rng);
  for (Ridge ridge : {Ridge::relative_to_trace(1e-2), Ridge::absolute(0.3)}) {
    const Matrix analytic = olm_backward_group(r, orth_transform(v, ridge));
    const Matrix numeric = check::central_difference(
        [&](const Matrix& x) { return linear_loss(x, r, OrthKind::minimal_distortion, ridge); },
        v);
    EXPECT_LT(check::max_relative_error(analytic, numeric), 1e-5);
  }
}

TEST(BackwardGroup, NonlinearLoss) {
  // L = Σ sin(W_ij)·R_ij, so ∂L/∂W = cos(W)∘R.
  Rng rng = make_rng(51);
  const Matrix v = gaussian_matrix(4, 8, rng);
  const Matrix r = gaussian_matrix(4, 8, rng);
  const GroupCache gc = orth_transform(v);
  Matrix upstream = r;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 8; ++j) upstream(i, j) *= std::cos(gc.w(i, j));
  const Matrix analytic = olm_backward_group(upstream, gc);
  const Matrix numeric = check::central_difference(
      [&](const Matrix& x) {
        const Matrix w = orth_transform(x).w;
        double s = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t j = 0; j < 8; ++j) s += std::sin(w(i, j)) * r(i, j);
        return s;
      },
      v);
  EXPECT_LT(check::max_relative_error(analytic, numeric), 1e-5);
}

TEST(BackwardGroup, RandomShapesProperty) {
  // d starts at n+1: with d == n the centered group is rank deficient.
  Rng rng = make_rng(53);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::size_t d = n + 1; d <= 8; ++d) {
      const Matrix v = gaussian_matrix(n, d, rng);
      const Matrix r = gaussian_matrix(n, d, rng);
      const Matrix analytic = olm_backward_group(r, orth_transform(v));
      const Matrix numeric = check::central_difference(
          [&](const Matrix& x) { return linear_loss(x, r, OrthKind::minimal_distortion); }, v);
      EXPECT_LT(check::max_relative_error(analytic, numeric), 1e-5) << n << "x" << d;
    }
  }
}

TEST(Eigengap, ZeroesNearDegeneratePairs) {
  const Matrix k = eigengap_matrix({3.0, 3.0 - 1e-9, 1.0});
  EXPECT_EQ(k(0, 1), 0.0);
  EXPECT_EQ(k(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(k(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(k(2, 0), -0.5);
  EXPECT_EQ(k(1, 1), 0.0);
}

TEST(Symmetrize, ExactlySymmetric) {
  Rng rng = make_rng(55);
  const Matrix s = symmetrize(gaussian_matrix(6, 6, rng));
  EXPECT_EQ(s, transpose(s));
}

}  // namespace
}  // namespace own::olm
