#include "own/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "own/errors.hpp"

namespace own::nn {

Network::Network(const std::vector<LayerSpec>& specs, Rng& rng) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim) {
      throw ConfigError("layer " + std::to_string(i) + " expects " +
                        std::to_string(specs[i].in_dim) + " inputs, previous layer emits " +
                        std::to_string(specs[i - 1].out_dim));
    }
    layers_.push_back(make_layer(specs[i], rng));
  }
}

Network::Network(std::vector<std::unique_ptr<Layer>> layers) : layers_(std::move(layers)) {
  const auto s = specs();
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].in_dim != s[i - 1].out_dim) {
      throw ConfigError("layer " + std::to_string(i) + " does not conform to its predecessor");
    }
  }
}

Network::Network(const Network& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Matrix Network::forward(const Matrix& x, bool train) {
  Matrix h = x;
  for (auto& l : layers_) h = l->forward(h, train);
  return h;
}

Matrix Network::backward(const Matrix& dlogits) {
  Matrix g = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<ParamView> Network::params() {
  std::vector<ParamView> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (ParamView& pv : layers_[i]->params()) {
      pv.name = std::to_string(i) + "." + pv.name;
      out.push_back(std::move(pv));
    }
  }
  return out;
}

void Network::apply_step(Optimizer& opt, double lr) {
  opt.step(params(), lr);
  for (auto& l : layers_) l->manifold_step(lr);
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

std::vector<LayerSpec> make_mlp_specs(const MlpSpec& mlp) {
  if (mlp.in_dim == 0 || mlp.classes == 0) throw ConfigError("mlp: empty input or output");
  switch (mlp.linear.kind) {
    case LayerKind::linear:
    case LayerKind::wn_linear:
    case LayerKind::olm_linear:
    case LayerKind::stiefel_linear:
      break;
    default:
      throw ConfigError("mlp: hidden blocks need a linear layer kind");
  }
  std::vector<LayerSpec> out;
  std::size_t prev = mlp.in_dim;
  auto push_linear = [&](std::size_t width) {
    LayerSpec s = mlp.linear;
    s.in_dim = prev;
    s.out_dim = width;
    out.push_back(s);
    prev = width;
  };
  for (std::size_t width : mlp.hidden) {
    push_linear(width);
    if (mlp.batchnorm) {
      LayerSpec bn;
      bn.kind = LayerKind::batchnorm;
      bn.in_dim = bn.out_dim = width;
      bn.bn_eps = mlp.bn_eps;
      bn.bn_momentum = mlp.bn_momentum;
      out.push_back(bn);
    }
    LayerSpec r;
    r.kind = LayerKind::relu;
    r.in_dim = r.out_dim = width;
    out.push_back(r);
  }
  push_linear(mlp.classes);
  return out;
}

StepStats train_step(Network& net, const data::Batch& batch, Optimizer& opt, double lr) {
  const Matrix logits = net.forward(batch.x, true);
  LossResult lr_out = softmax_xent(logits, batch.labels);
  net.backward(lr_out.grad);
  net.apply_step(opt, lr);
  return {lr_out.loss, lr_out.errors, batch.labels.size()};
}

EpochStats train_epoch(Network& net, const data::Dataset& ds, std::size_t batch_size,
                       std::uint64_t seed, std::uint64_t epoch, Optimizer& opt, double lr,
                       DivergenceGuard* guard) {
  EpochStats st;
  data::BatchStream stream(ds, batch_size, seed, epoch);
  double loss_sum = 0.0;
  std::size_t errors = 0, samples = 0;
  auto diverge = [&](std::string why) {
    st.diverged = true;
    st.reason = std::move(why);
  };
  while (!stream.done()) {
    const data::Batch batch = stream.next();
    try {
      const Matrix logits = net.forward(batch.x, true);
      LossResult res = softmax_xent(logits, batch.labels);
      loss_sum += res.loss;
      errors += res.errors;
      samples += batch.labels.size();
      ++st.batches;
      if (guard) {
        if (!guard->initial_loss) guard->initial_loss = res.loss;
        if (!std::isfinite(res.loss)) {
          diverge("non-finite loss");
          break;
        }
        if (res.loss > guard->factor * *guard->initial_loss) {
          diverge("loss exceeded " + std::to_string(guard->factor) + "x the initial loss");
          break;
        }
      }
      net.backward(res.grad);
      net.apply_step(opt, lr);
    } catch (const RankError& e) {
      if (!guard) throw;
      diverge(e.what());
      break;
    } catch (const SingularityError& e) {
      if (!guard) throw;
      diverge(e.what());
      break;
    } catch (const DivergenceError& e) {
      if (!guard) throw;
      diverge(e.what());
      break;
    } catch (const ValueError& e) {
      if (!guard) throw;
      diverge(e.what());
      break;
    }
  }
  if (st.batches > 0) {
    st.mean_loss = loss_sum / static_cast<double>(st.batches);
    st.error_rate = static_cast<double>(errors) / static_cast<double>(samples);
  } else {
    st.mean_loss = std::nan("");
    st.error_rate = std::nan("");
  }
  return st;
}

EvalStats evaluate(Network& net, const data::Dataset& ds, std::size_t batch_size) {
  if (batch_size == 0) throw ValueError("evaluate: batch size must be positive");
  double loss = 0.0;
  std::size_t errors = 0;
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < ds.count(); first += batch_size) {
    const std::size_t m = std::min(batch_size, ds.count() - first);
    idx.resize(m);
    for (std::size_t k = 0; k < m; ++k) idx[k] = first + k;
    const data::Batch b = data::gather(ds, idx);
    const LossResult r = softmax_xent(net.forward(b.x, false), b.labels);
    loss += r.loss * static_cast<double>(m);
    errors += r.errors;
  }
  const double n = static_cast<double>(ds.count());
  return {loss / n, static_cast<double>(errors) / n};
}

}  // namespace own::nn
