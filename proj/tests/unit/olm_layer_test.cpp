#include <gtest/gtest.h>

#include <cmath>

#include "own/errors.hpp"
#include "own/gradcheck.hpp"
#include "own/olm/conv.hpp"
#include "own/olm/layer.hpp"
#include "own/random.hpp"

namespace own::olm {
namespace {

Matrix row_vector(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

std::vector<double> to_vec(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

TEST(PartitionRows, RemainderFormsLastGroup) {
  const auto g = partition_rows(10, 4);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[2].first, 8u);
  EXPECT_EQ(g[2].count, 2u);
  EXPECT_EQ(partition_rows(6, 3).size(), 2u);
  EXPECT_THROW(partition_rows(4, 0), DimensionError);
}

TEST(OlmForward, SingleRowClosedForm) {
  OlmParams p;
  p.v = Matrix::from_rows({{3, 1}});
  p.bias = {0.0};
  const OlmForward f = olm_forward(p, Matrix::identity(2));
  EXPECT_NEAR(f.s(0, 0), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(f.s(0, 1), -1.0 / std::sqrt(2.0), 1e-15);
}

TEST(OlmForward, ZeroInputYieldsBias) {
  Rng rng = make_rng(61);
  for (bool with_scale : {false, true}) {
    OlmParams p = make_olm_params(4, 6, 2, with_scale, rng);
    p.bias = {1.5, -2.0, 0.25, 3.0};
    if (with_scale) p.scale = std::vector<double>{2.0, 0.5, -1.0, 3.0};
    const OlmForward f = olm_forward(p, Matrix(6, 5));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(f.s(i, j), p.bias[i]);
  }
}

TEST(OlmForward, GroupsAreOrthonormalBlocks) {
  Rng rng = make_rng(63);
  const OlmParams p = make_olm_params(4, 6, 2, false, rng);
  const OlmForward f = olm_forward(p, gaussian_matrix(6, 8, rng));
  ASSERT_EQ(f.cache.groups.size(), 2u);
  EXPECT_LT(row_orthonormality_error(f.cache.w.row_block(0, 2)), 1e-8);
  EXPECT_LT(row_orthonormality_error(f.cache.w.row_block(2, 2)), 1e-8);
  for (const GroupCache& gc : f.cache.groups) EXPECT_EQ(gc.sigma, transpose(gc.sigma));
}

TEST(OlmForward, RejectsBadShapes) {
  Rng rng = make_rng(65);
  OlmParams p = make_olm_params(4, 6, 2, false, rng);
  EXPECT_THROW(olm_forward(p, Matrix(5, 3)), DimensionError);
  p.group_size = 7;
  EXPECT_THROW(olm_forward(p, Matrix(6, 3)), DimensionError);
  p.group_size = 2;
  p.bias.pop_back();
  EXPECT_THROW(olm_forward(p, Matrix(6, 3)), DimensionError);
}

TEST(OlmBackward, ZeroUpstream) {
  Rng rng = make_rng(67);
  const OlmParams p = make_olm_params(4, 6, 2, true, rng);
  const OlmForward f = olm_forward(p, gaussian_matrix(6, 3, rng));
  const OlmGrads g = olm_backward(Matrix(4, 3), f.cache, p);
  EXPECT_EQ(max_abs(g.v), 0.0);
  EXPECT_EQ(max_abs(g.h), 0.0);
  EXPECT_EQ(g.bias, std::vector<double>(4, 0.0));
  EXPECT_EQ(*g.scale, std::vector<double>(4, 0.0));
}

TEST(OlmBackward, SingleGroupUnfoldsToGroupBackward) {
  Rng rng = make_rng(69);
  const OlmParams p = make_olm_params(3, 7, 3, false, rng);
  const Matrix h = gaussian_matrix(7, 5, rng);
  const OlmForward f = olm_forward(p, h);
  const Matrix ds = gaussian_matrix(3, 5, rng);
  const OlmGrads g = olm_backward(ds, f.cache, p);
  EXPECT_EQ(g.v, olm_backward_group(matmul_nt(ds, h), f.cache.groups[0]));
}

TEST(OlmBackward, AllGradientsMatchFiniteDifferences) {
  Rng rng = make_rng(71);
  OlmParams p = make_olm_params(4, 6, 2, true, rng);
  p.bias = {0.1, -0.2, 0.3, 0.4};
  p.scale = std::vector<double>{1.3, 0.7, -0.9, 1.1};
  const Matrix h = gaussian_matrix(6, 3, rng);
  const Matrix r = gaussian_matrix(4, 3, rng);

  auto loss = [&](const OlmParams& q, const Matrix& x) {
    return check::inner(olm_forward(q, x).s, r);
  };
  const OlmForward f = olm_forward(p, h);
  const OlmGrads g = olm_backward(r, f.cache, p);

  const Matrix nv = check::central_difference(
      [&](const Matrix& v) {
        OlmParams q = p;
        q.v = v;
        return loss(q, h);
      },
      p.v);
  EXPECT_LT(check::max_relative_error(g.v, nv), 1e-5);

  const Matrix nh = check::central_difference([&](const Matrix& x) { return loss(p, x); }, h);
  EXPECT_LT(check::max_relative_error(g.h, nh), 1e-5);

  const Matrix nb = check::central_difference(
      [&](const Matrix& b) {
        OlmParams q = p;
        q.bias = to_vec(b);
        return loss(q, h);
      },
      row_vector(p.bias));
  EXPECT_LT(check::max_relative_error(row_vector(g.bias), nb), 1e-5);

  const Matrix ns = check::central_difference(
      [&](const Matrix& s) {
        OlmParams q = p;
        q.scale = to_vec(s);
        return loss(q, h);
      },
      row_vector(*p.scale));
  EXPECT_LT(check::max_relative_error(row_vector(*g.scale), ns), 1e-5);
}

TEST(OlmBackward, RemainderGroupAndEigenbasisKind) {
  Rng rng = make_rng(73);
  OlmParams p = make_olm_params(5, 7, 2, false, rng);
  p.kind = OrthKind::eigenbasis;
  const Matrix h = gaussian_matrix(7, 4, rng);
  const Matrix r = gaussian_matrix(5, 4, rng);
  const OlmGrads g = olm_backward(r, olm_forward(p, h).cache, p);
  const Matrix nv = check::central_difference(
      [&](const Matrix& v) {
        OlmParams q = p;
        q.v = v;
        return check::inner(olm_forward(q, h).s, r);
      },
      p.v);
  EXPECT_LT(check::max_relative_error(g.v, nv), 1e-5);
}

TEST(OlmBackward, RejectsMismatchedUpstream) {
  Rng rng = make_rng(75);
  const OlmParams p = make_olm_params(4, 6, 2, false, rng);
  const OlmForward f = olm_forward(p, gaussian_matrix(6, 3, rng));
  EXPECT_THROW(olm_backward(Matrix(4, 2), f.cache, p), DimensionError);
}

TEST(ExportWeights, InferenceIsBitExact) {
  Rng rng = make_rng(77);
  for (bool with_scale : {false, true}) {
    OlmParams p = make_olm_params(10, 12, 4, with_scale, rng);
    p.bias = to_vec(gaussian_matrix(1, 10, rng));
    if (with_scale) p.scale = to_vec(gaussian_matrix(1, 10, rng));
    const LinearWeights lw = export_weights(p);
    for (int batch = 0; batch < 10; ++batch) {
      const Matrix h = gaussian_matrix(12, 16, rng);
      EXPECT_EQ(linear_apply(lw, h), olm_forward(p, h).s);
    }
  }
}

TEST(ExportWeights, SingleRowGroupsAreCenteredUnitRows) {
  Rng rng = make_rng(79);
  OlmParams p = make_olm_params(3, 5, 1, false, rng);
  const Matrix w = export_weights(p).w;
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (double x : p.v.row(i)) mean += x;
    mean /= 5.0;
    double norm = 0.0;
    for (double x : p.v.row(i)) norm += (x - mean) * (x - mean);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(w(i, j), (p.v(i, j) - mean) / norm, 1e-14);
  }
}

FilterBank random_bank(std::size_t n, std::size_t c, std::size_t fh, std::size_t fw, Rng& rng) {
  FilterBank b{n, c, fh, fw, to_vec(gaussian_matrix(1, n * c * fh * fw, rng))};
  return b;
}

TEST(ConvUnroll, SmallestCase) {
  const FilterBank b{1, 1, 1, 2, {5, 7}};
  EXPECT_EQ(unroll_conv_weights(b), Matrix::from_rows({{5, 7}}));
}

TEST(ConvUnroll, IndexLayoutAndRoundTrip) {
  Rng rng = make_rng(81);
  const FilterBank b = random_bank(2, 3, 2, 2, rng);
  const Matrix m = unroll_conv_weights(b);
  ASSERT_EQ(m.rows(), 2u);
  ASSERT_EQ(m.cols(), 12u);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(m(k, c * 4 + i * 2 + j), b.at(k, c, i, j));
  EXPECT_EQ(reshape_conv_weights(m, 3, 2, 2), b);
}

TEST(ConvUnroll, RejectsInconsistentShapes) {
  EXPECT_THROW(reshape_conv_weights(Matrix(2, 12), 5, 2, 2), DimensionError);
  EXPECT_THROW(unroll_conv_weights(FilterBank{2, 1, 1, 1, {1.0}}), DimensionError);
}

}  // namespace
}  // namespace own::olm
