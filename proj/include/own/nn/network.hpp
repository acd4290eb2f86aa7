#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "own/data.hpp"
#include "own/nn/layers.hpp"
#include "own/nn/loss.hpp"
#include "own/nn/optim.hpp"

namespace own::nn {

class Network {
 public:
  Network() = default;
  // Validates every spec and that adjacent dimensions conform.
  Network(const std::vector<LayerSpec>& specs, Rng& rng);
  explicit Network(std::vector<std::unique_ptr<Layer>> layers);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  Matrix forward(const Matrix& x, bool train);
  // Returns ∂L/∂x for the network input.
  Matrix backward(const Matrix& dlogits);

  std::vector<ParamView> params();
  // Optimizer update for free parameters, then manifold steps.
  void apply_step(Optimizer& opt, double lr);

  std::vector<LayerSpec> specs() const;
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Layer stack for a fully connected classifier: each hidden block is
// linear → [batchnorm] → relu, followed by a linear output layer of the same
// linear kind.
struct MlpSpec {
  std::size_t in_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t classes = 0;
  LayerSpec linear;  // kind and method fields; dims are filled in per layer
  bool batchnorm = false;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

std::vector<LayerSpec> make_mlp_specs(const MlpSpec& mlp);

struct StepStats {
  double loss = 0.0;
  std::size_t errors = 0;
  std::size_t samples = 0;
};

// Forward, loss, backward and parameter update on one batch. The loss and
// error count describe the parameters before the update.
StepStats train_step(Network& net, const data::Batch& batch, Optimizer& opt, double lr);

// Divergence rule for training: loss non-finite or above factor × the first
// batch loss seen; numerical failures inside a step also count.
struct DivergenceGuard {
  double factor = 10.0;
  std::optional<double> initial_loss;
};

struct EpochStats {
  double mean_loss = 0.0;   // running mean of per-batch losses
  double error_rate = 0.0;  // running training error over the batches seen
  std::size_t batches = 0;
  bool diverged = false;
  std::string reason;
};

// One pass over ds in the (seed, epoch) batch order. Without a guard,
// numerical errors propagate as exceptions.
EpochStats train_epoch(Network& net, const data::Dataset& ds, std::size_t batch_size,
                       std::uint64_t seed, std::uint64_t epoch, Optimizer& opt, double lr,
                       DivergenceGuard* guard = nullptr);

struct EvalStats {
  double mean_loss = 0.0;
  double error_rate = 0.0;
};

// Inference-mode pass in dataset order.
EvalStats evaluate(Network& net, const data::Dataset& ds, std::size_t batch_size);

}  // namespace own::nn
