#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "own/linalg/matrix.hpp"
#include "own/olm/transform.hpp"
#include "own/random.hpp"

namespace own::olm {

struct RowGroup {
  std::size_t first = 0;
  std::size_t count = 0;
};

// Contiguous blocks of group_size rows; a trailing remainder forms a smaller
// final group.
std::vector<RowGroup> partition_rows(std::size_t rows, std::size_t group_size);

// Parameters of an orthogonal linear module. Only v is orthogonalized; bias
// and scale are free.
struct OlmParams {
  Matrix v;                                  // n×d proxy parameters
  std::vector<double> bias;                  // n
  std::size_t group_size = 1;                // rows per orthogonalized group
  std::optional<std::vector<double>> scale;  // per-row multiplier after the transform
  Ridge ridge{};
  OrthKind kind = OrthKind::minimal_distortion;

  std::size_t out_dim() const { return v.rows(); }
  std::size_t in_dim() const { return v.cols(); }

  // Throws DimensionError / ValueError when the invariants do not hold.
  void validate() const;
};

// V ~ N(0, 1/d), bias 0, scale 1 when enabled.
OlmParams make_olm_params(std::size_t out_dim, std::size_t in_dim, std::size_t group_size,
                          bool with_scale, Rng& rng);

struct OlmCache {
  std::vector<GroupCache> groups;
  Matrix w;   // stacked group outputs, n×d
  Matrix h;   // layer input, d×m
  Matrix wh;  // W·h before scale and bias
};

struct OlmForward {
  Matrix s;
  OlmCache cache;
};

struct OlmGrads {
  Matrix v;
  std::vector<double> bias;
  std::optional<std::vector<double>> scale;
  Matrix h;
};

// Stacked per-group transform of v.
Matrix orthogonalize_rows(const Matrix& v, std::size_t group_size, OrthKind kind,
                          Ridge ridge, std::vector<GroupCache>* caches = nullptr);

OlmForward olm_forward(const OlmParams& params, const Matrix& h);
OlmGrads olm_backward(const Matrix& dL_dS, const OlmCache& cache, const OlmParams& params);

// Plain affine layer weights: s = diag(scale)·w·h + bias·1ᵀ.
struct LinearWeights {
  Matrix w;
  std::vector<double> bias;
  std::optional<std::vector<double>> scale;
};

LinearWeights export_weights(const OlmParams& params);
Matrix linear_apply(const LinearWeights& weights, const Matrix& h);

// Adds scale and bias to a precomputed w·h. Shared by the OLM forward and
// linear_apply so both produce identical bits.
Matrix finish_affine(Matrix wh, const std::vector<double>& bias,
                     const std::optional<std::vector<double>>& scale);

}  // namespace own::olm
