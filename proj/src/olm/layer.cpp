#include "own/olm/layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "own/errors.hpp"

namespace own::olm {

std::vector<RowGroup> partition_rows(std::size_t rows, std::size_t group_size) {
  if (group_size == 0) throw DimensionError("partition_rows: group size must be positive");
  std::vector<RowGroup> groups;
  for (std::size_t first = 0; first < rows; first += group_size) {
    groups.push_back({first, std::min(group_size, rows - first)});
  }
  return groups;
}

void OlmParams::validate() const {
  const std::size_t n = v.rows();
  const std::size_t d = v.cols();
  if (n == 0 || d == 0) throw DimensionError("OlmParams: empty proxy matrix");
  if (group_size == 0 || group_size > d) {
    throw DimensionError("OlmParams: group size " + std::to_string(group_size) +
                         " must be in [1, " + std::to_string(d) + "]");
  }
  if (bias.size() != n) {
    throw DimensionError("OlmParams: bias has " + std::to_string(bias.size()) +
                         " entries, expected " + std::to_string(n));
  }
  if (scale && scale->size() != n) {
    throw DimensionError("OlmParams: scale has " + std::to_string(scale->size()) +
                         " entries, expected " + std::to_string(n));
  }
  if (!all_finite(v) || !all_finite(std::span<const double>(bias)) ||
      (scale && !all_finite(std::span<const double>(*scale)))) {
    throw ValueError("OlmParams: non-finite parameter");
  }
}

OlmParams make_olm_params(std::size_t out_dim, std::size_t in_dim, std::size_t group_size,
                          bool with_scale, Rng& rng) {
  OlmParams p;
  p.v = gaussian_matrix(out_dim, in_dim, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
  p.bias.assign(out_dim, 0.0);
  p.group_size = group_size;
  if (with_scale) p.scale = std::vector<double>(out_dim, 1.0);
  p.validate();
  return p;
}

Matrix orthogonalize_rows(const Matrix& v, std::size_t group_size, OrthKind kind,
                          Ridge ridge, std::vector<GroupCache>* caches) {
  Matrix w(v.rows(), v.cols());
  if (caches) caches->clear();
  for (const RowGroup& g : partition_rows(v.rows(), group_size)) {
    GroupCache gc = orthogonalize(v.row_block(g.first, g.count), kind, ridge);
    w.set_row_block(g.first, gc.w);
    if (caches) caches->push_back(std::move(gc));
  }
  return w;
}

Matrix finish_affine(Matrix wh, const std::vector<double>& bias,
                     const std::optional<std::vector<double>>& scale) {
  if (bias.size() != wh.rows() || (scale && scale->size() != wh.rows())) {
    throw DimensionError("affine: bias/scale length does not match output rows");
  }
  for (std::size_t i = 0; i < wh.rows(); ++i) {
    auto r = wh.row(i);
    const double b = bias[i];
    if (scale) {
      const double g = (*scale)[i];
      for (double& x : r) x = g * x + b;
    } else {
      for (double& x : r) x += b;
    }
  }
  return wh;
}

OlmForward olm_forward(const OlmParams& params, const Matrix& h) {
  params.validate();
  if (h.rows() != params.in_dim()) {
    throw DimensionError("olm_forward: input has " + std::to_string(h.rows()) +
                         " rows, layer expects " + std::to_string(params.in_dim()));
  }
  OlmForward out;
  out.cache.w = orthogonalize_rows(params.v, params.group_size, params.kind, params.ridge,
                                   &out.cache.groups);
  out.cache.h = h;
  out.cache.wh = matmul(out.cache.w, h);
  out.s = finish_affine(out.cache.wh, params.bias, params.scale);
  return out;
}

OlmGrads olm_backward(const Matrix& dL_dS, const OlmCache& cache, const OlmParams& params) {
  const std::size_t n = params.out_dim();
  const std::size_t m = cache.h.cols();
  if (dL_dS.rows() != n || dL_dS.cols() != m) {
    throw DimensionError("olm_backward: upstream gradient is " +
                         std::to_string(dL_dS.rows()) + "x" + std::to_string(dL_dS.cols()) +
                         ", expected " + std::to_string(n) + "x" + std::to_string(m));
  }

  OlmGrads grads;
  grads.bias.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (double x : dL_dS.row(i)) grads.bias[i] += x;

  Matrix scaled = dL_dS;
  if (params.scale) {
    grads.scale = std::vector<double>(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto gs = dL_dS.row(i);
      auto wh = cache.wh.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += gs[j] * wh[j];
      (*grads.scale)[i] = acc;
      const double g = (*params.scale)[i];
      for (double& x : scaled.row(i)) x *= g;
    }
  }

  const Matrix dL_dW = matmul_nt(scaled, cache.h);
  grads.h = matmul_tn(cache.w, scaled);

  grads.v = Matrix(n, params.in_dim());
  const auto groups = partition_rows(n, params.group_size);
  if (groups.size() != cache.groups.size()) {
    throw DimensionError("olm_backward: cache does not match the parameter grouping");
  }
  for (std::size_t k = 0; k < groups.size(); ++k) {
    const RowGroup& g = groups[k];
    grads.v.set_row_block(
        g.first, olm_backward_group(dL_dW.row_block(g.first, g.count), cache.groups[k]));
  }
  return grads;
}

LinearWeights export_weights(const OlmParams& params) {
  params.validate();
  return {orthogonalize_rows(params.v, params.group_size, params.kind, params.ridge),
          params.bias, params.scale};
}

Matrix linear_apply(const LinearWeights& weights, const Matrix& h) {
  if (h.rows() != weights.w.cols()) {
    throw DimensionError("linear_apply: input has " + std::to_string(h.rows()) +
                         " rows, weights expect " + std::to_string(weights.w.cols()));
  }
  return finish_affine(matmul(weights.w, h), weights.bias, weights.scale);
}

}  // namespace own::olm
