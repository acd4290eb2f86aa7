#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "own/nn/layers.hpp"

namespace own::nn {

enum class OptimizerKind { sgd, momentum, adam };

std::string_view optimizer_name(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // L2 coefficient added to the gradient of parameters flagged for decay.
  double weight_decay = 0.0;
};

// p ← p − lr·g
void sgd_step(std::span<double> p, std::span<const double> g, double lr);

// v ← μ·v + g;  p ← p − lr·v
void momentum_step(std::span<double> p, std::span<const double> g, std::span<double> velocity,
                   double lr, double mu);

// Bias-corrected Adam; t is the 1-based step count.
void adam_step(std::span<double> p, std::span<const double> g, std::span<double> m,
               std::span<double> v, std::size_t t, double lr, double beta1, double beta2,
               double eps);

// Owns the per-parameter slots for one network. Parameters are matched by
// position, so the same network layout must be passed on every call.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {}

  // DivergenceError (before anything is modified) if a gradient is non-finite.
  void step(const std::vector<ParamView>& params, double lr);

  std::size_t steps() const { return t_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<std::vector<double>> first_, second_;
  std::size_t t_ = 0;
};

}  // namespace own::nn
