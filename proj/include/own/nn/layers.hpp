#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "own/linalg/matrix.hpp"
#include "own/olm/layer.hpp"
#include "own/random.hpp"
#include "own/stiefel.hpp"

namespace own::nn {

enum class LayerKind : std::uint32_t {
  linear = 1,
  wn_linear = 2,
  olm_linear = 3,
  stiefel_linear = 4,
  relu = 5,
  batchnorm = 6,
};

std::string_view kind_name(LayerKind k);

struct LayerSpec {
  LayerKind kind = LayerKind::linear;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  // olm_linear / stiefel_linear
  std::size_t group_size = 0;  // 0 means one group spanning all rows
  bool scale = false;          // olm_linear / linear: learnable per-row scale
  olm::OrthKind orth = olm::OrthKind::minimal_distortion;
  olm::Ridge ridge{};
  bool decay_proxy = false;  // apply weight decay to the OLM proxy V
  stiefel::Method manifold = stiefel::Method::euclidean_qr;

  // batchnorm
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  // Rows per group after resolving 0 and oversized values to out_dim.
  std::size_t groups_of() const {
    return group_size == 0 || group_size > out_dim ? out_dim : group_size;
  }

  // Throws ConfigError when dims or method parameters are inconsistent.
  void validate() const;
};

// A trainable array and its gradient from the last backward.
struct ParamView {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
  bool decay = true;
};

// Layers work on column batches: x is features×m. forward caches what backward
// needs; backward stores parameter gradients and returns ∂L/∂x.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Matrix forward(const Matrix& x, bool train) = 0;
  virtual Matrix backward(const Matrix& dy) = 0;

  // Parameters the optimizer updates.
  virtual std::vector<ParamView> params() { return {}; }
  // Every persistent array (parameters plus running statistics) in the fixed
  // order used by checkpoints.
  virtual std::vector<std::span<double>> state() { return {}; }
  // Weights that live on a manifold and are stepped by their own rule.
  virtual void manifold_step(double /*lr*/) {}

  virtual std::unique_ptr<Layer> clone() const = 0;
};

// Parameters are drawn from rng; zero-filled arrays come out of
// make_layer_shell and are meant to be overwritten (checkpoint loading).
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& rng);
std::unique_ptr<Layer> make_layer_shell(const LayerSpec& spec);

// s = diag(scale)·w·x + b·1ᵀ; the scale is absent for ordinary layers and
// present for layers exported from a scaled OLM layer.
class LinearLayer final : public Layer {
 public:
  LinearLayer(Matrix w, std::vector<double> b,
              std::optional<std::vector<double>> scale = std::nullopt);

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::vector<ParamView> params() override;
  std::vector<std::span<double>> state() override;
  std::unique_ptr<Layer> clone() const override;

  const Matrix& weight() const { return w_; }

 private:
  Matrix w_, dw_;
  std::vector<double> b_, db_;
  std::optional<std::vector<double>> scale_, dscale_;
  Matrix x_, wx_;
};

// w_i = g_i·v_i/‖v_i‖
class WnLinearLayer final : public Layer {
 public:
  WnLinearLayer(Matrix v, std::vector<double> g, std::vector<double> b);

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::vector<ParamView> params() override;
  std::vector<std::span<double>> state() override;
  std::unique_ptr<Layer> clone() const override;

  // Effective weights; ValueError if a row of v has norm ≤ 1e-12.
  Matrix effective_weight() const;

 private:
  Matrix v_, dv_;
  std::vector<double> g_, dg_, b_, db_;
  Matrix x_, w_;
  std::vector<double> norms_;
};

class OlmLinearLayer final : public Layer {
 public:
  OlmLinearLayer(olm::OlmParams p, bool decay_proxy);

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::vector<ParamView> params() override;
  std::vector<std::span<double>> state() override;
  std::unique_ptr<Layer> clone() const override;

  const olm::OlmParams& olm_params() const { return p_; }
  // W from the most recent forward.
  const Matrix& last_weight() const { return cache_.w; }

 private:
  olm::OlmParams p_;
  bool decay_proxy_;
  olm::OlmCache cache_;
  olm::OlmGrads grads_;
};

// Row-orthonormal weights (per group) updated directly on the manifold.
class StiefelLinearLayer final : public Layer {
 public:
  StiefelLinearLayer(Matrix w, std::vector<double> b, std::size_t group_size,
                     stiefel::Method method);

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::vector<ParamView> params() override;
  std::vector<std::span<double>> state() override;
  void manifold_step(double lr) override;
  std::unique_ptr<Layer> clone() const override;

  const Matrix& weight() const { return w_; }

 private:
  Matrix w_, dw_;
  std::vector<double> b_, db_;
  std::size_t group_size_;
  stiefel::Method method_;
  Matrix x_;
};

class ReluLayer final : public Layer {
 public:
  explicit ReluLayer(std::size_t dim) : dim_(dim) {}

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::unique_ptr<Layer> clone() const override;

 private:
  std::size_t dim_;
  Matrix x_;
};

// Per-feature normalization over the batch, followed by gamma·x̂ + beta.
// Running statistics use the unbiased batch variance.
class BatchNormLayer final : public Layer {
 public:
  BatchNormLayer(std::size_t dim, double eps, double momentum);

  LayerSpec spec() const override;
  Matrix forward(const Matrix& x, bool train) override;
  Matrix backward(const Matrix& dy) override;
  std::vector<ParamView> params() override;
  std::vector<std::span<double>> state() override;
  std::unique_ptr<Layer> clone() const override;

  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }

 private:
  std::size_t dim_;
  double eps_, momentum_;
  std::vector<double> gamma_, beta_, dgamma_, dbeta_;
  std::vector<double> running_mean_, running_var_;
  Matrix xhat_;
  std::vector<double> inv_std_;
  bool last_train_ = true;
};

}  // namespace own::nn
