#include "own/nn/optim.hpp"

#include <cmath>

#include "own/errors.hpp"

namespace own::nn {

std::string_view optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::momentum: return "momentum";
    case OptimizerKind::adam: return "adam";
  }
  return "unknown";
}

void sgd_step(std::span<double> p, std::span<const double> g, double lr) {
  for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
}

void momentum_step(std::span<double> p, std::span<const double> g, std::span<double> velocity,
                   double lr, double mu) {
  for (std::size_t k = 0; k < p.size(); ++k) {
    velocity[k] = mu * velocity[k] + g[k];
    p[k] -= lr * velocity[k];
  }
}

void adam_step(std::span<double> p, std::span<const double> g, std::span<double> m,
               std::span<double> v, std::size_t t, double lr, double beta1, double beta2,
               double eps) {
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
    p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
  }
}

void Optimizer::step(const std::vector<ParamView>& params, double lr) {
  for (const ParamView& pv : params) {
    if (pv.value.size() != pv.grad.size()) {
      throw DimensionError("Optimizer: parameter " + pv.name + " and its gradient differ in size");
    }
    if (!all_finite(std::span<const double>(pv.grad))) {
      throw DivergenceError("Optimizer: non-finite gradient for " + pv.name);
    }
  }
  if (first_.empty()) {
    first_.resize(params.size());
    if (config_.kind == OptimizerKind::adam) second_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i].assign(params[i].value.size(), 0.0);
      if (config_.kind == OptimizerKind::adam) second_[i].assign(params[i].value.size(), 0.0);
    }
  } else if (first_.size() != params.size()) {
    throw DimensionError("Optimizer: parameter layout changed between steps");
  }
  ++t_;
  std::vector<double> decayed;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamView& pv = params[i];
    std::span<const double> g = pv.grad;
    if (pv.decay && config_.weight_decay != 0.0) {
      decayed.assign(g.begin(), g.end());
      for (std::size_t k = 0; k < decayed.size(); ++k)
        decayed[k] += config_.weight_decay * pv.value[k];
      g = decayed;
    }
    switch (config_.kind) {
      case OptimizerKind::sgd:
        sgd_step(pv.value, g, lr);
        break;
      case OptimizerKind::momentum:
        momentum_step(pv.value, g, first_[i], lr, config_.momentum);
        break;
      case OptimizerKind::adam:
        adam_step(pv.value, g, first_[i], second_[i], t_, lr, config_.beta1, config_.beta2,
                  config_.adam_eps);
        break;
    }
  }
}

}  // namespace own::nn
