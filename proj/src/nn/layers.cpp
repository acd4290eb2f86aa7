#include "own/nn/layers.hpp"

#include <cmath>
#include <string>

#include "own/errors.hpp"
#include "own/linalg/decompositions.hpp"

namespace own::nn {

namespace {

void require_rows(const char* who, const Matrix& x, std::size_t rows) {
  if (x.rows() != rows) {
    throw DimensionError(std::string(who) + ": input has " + std::to_string(x.rows()) +
                         " rows, layer expects " + std::to_string(rows));
  }
}

void require_same(const char* who, const Matrix& dy, std::size_t rows, std::size_t cols) {
  if (dy.rows() != rows || dy.cols() != cols) {
    throw DimensionError(std::string(who) + ": upstream gradient is " +
                         std::to_string(dy.rows()) + "x" + std::to_string(dy.cols()) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// s = w·x + b·1ᵀ
Matrix affine(const Matrix& w, const Matrix& x, const std::vector<double>& b) {
  return olm::finish_affine(matmul(w, x), b, std::nullopt);
}

std::vector<double> row_sums(const Matrix& m) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row(i)) out[i] += v;
  return out;
}

Matrix fan_in_gaussian(std::size_t out, std::size_t in, Rng& rng) {
  return gaussian_matrix(out, in, rng, 1.0 / std::sqrt(static_cast<double>(in)));
}

std::span<double> span_of(std::vector<double>& v) { return v; }

}  // namespace

std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::linear: return "linear";
    case LayerKind::wn_linear: return "wn_linear";
    case LayerKind::olm_linear: return "olm_linear";
    case LayerKind::stiefel_linear: return "stiefel_linear";
    case LayerKind::relu: return "relu";
    case LayerKind::batchnorm: return "batchnorm";
  }
  return "unknown";
}

void LayerSpec::validate() const {
  const std::string who = std::string(kind_name(kind)) + " layer: ";
  if (in_dim == 0 || out_dim == 0) throw ConfigError(who + "dimensions must be positive");
  switch (kind) {
    case LayerKind::relu:
    case LayerKind::batchnorm:
      if (in_dim != out_dim) throw ConfigError(who + "in_dim must equal out_dim");
      if (kind == LayerKind::batchnorm &&
          !(bn_eps > 0.0 && bn_momentum > 0.0 && bn_momentum < 1.0)) {
        throw ConfigError(who + "needs eps > 0 and momentum in (0, 1)");
      }
      break;
    case LayerKind::olm_linear:
    case LayerKind::stiefel_linear:
      if (groups_of() > in_dim) {
        throw ConfigError(who + "group size " + std::to_string(groups_of()) +
                          " exceeds in_dim " + std::to_string(in_dim));
      }
      // Centering leaves in_dim − 1 directions, so an OLM group must be smaller
      // than in_dim.
      if (kind == LayerKind::olm_linear && groups_of() == in_dim) {
        throw ConfigError(who + "group size " + std::to_string(groups_of()) +
                          " equals in_dim; centered rows cannot be orthonormal");
      }
      if (!(ridge.coefficient >= 0.0)) throw ConfigError(who + "ridge must be non-negative");
      break;
    case LayerKind::linear:
    case LayerKind::wn_linear:
      break;
    default:
      throw ConfigError("unknown layer kind " + std::to_string(static_cast<unsigned>(kind)));
  }
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t n = spec.out_dim, d = spec.in_dim;
  switch (spec.kind) {
    case LayerKind::linear:
      return std::make_unique<LinearLayer>(
          fan_in_gaussian(n, d, rng), std::vector<double>(n, 0.0),
          spec.scale ? std::optional<std::vector<double>>(std::vector<double>(n, 1.0))
                     : std::nullopt);
    case LayerKind::wn_linear:
      return std::make_unique<WnLinearLayer>(fan_in_gaussian(n, d, rng),
                                             std::vector<double>(n, 1.0),
                                             std::vector<double>(n, 0.0));
    case LayerKind::olm_linear: {
      olm::OlmParams p = olm::make_olm_params(n, d, spec.groups_of(), spec.scale, rng);
      p.kind = spec.orth;
      p.ridge = spec.ridge;
      return std::make_unique<OlmLinearLayer>(std::move(p), spec.decay_proxy);
    }
    case LayerKind::stiefel_linear: {
      Matrix w(n, d);
      for (const olm::RowGroup& g : olm::partition_rows(n, spec.groups_of())) {
        w.set_row_block(g.first, transpose(qr_unique(gaussian_matrix(d, g.count, rng)).q));
      }
      return std::make_unique<StiefelLinearLayer>(std::move(w), std::vector<double>(n, 0.0),
                                                  spec.groups_of(), spec.manifold);
    }
    case LayerKind::relu:
      return std::make_unique<ReluLayer>(n);
    case LayerKind::batchnorm:
      return std::make_unique<BatchNormLayer>(n, spec.bn_eps, spec.bn_momentum);
  }
  throw ConfigError("make_layer: unknown layer kind");
}

std::unique_ptr<Layer> make_layer_shell(const LayerSpec& spec) {
  spec.validate();
  const std::size_t n = spec.out_dim, d = spec.in_dim;
  switch (spec.kind) {
    case LayerKind::linear:
      return std::make_unique<LinearLayer>(
          Matrix(n, d), std::vector<double>(n, 0.0),
          spec.scale ? std::optional<std::vector<double>>(std::vector<double>(n, 0.0))
                     : std::nullopt);
    case LayerKind::wn_linear:
      return std::make_unique<WnLinearLayer>(Matrix(n, d), std::vector<double>(n, 0.0),
                                             std::vector<double>(n, 0.0));
    case LayerKind::olm_linear: {
      olm::OlmParams p;
      p.v = Matrix(n, d);
      p.bias.assign(n, 0.0);
      p.group_size = spec.groups_of();
      if (spec.scale) p.scale = std::vector<double>(n, 0.0);
      p.kind = spec.orth;
      p.ridge = spec.ridge;
      return std::make_unique<OlmLinearLayer>(std::move(p), spec.decay_proxy);
    }
    case LayerKind::stiefel_linear:
      return std::make_unique<StiefelLinearLayer>(Matrix(n, d), std::vector<double>(n, 0.0),
                                                  spec.groups_of(), spec.manifold);
    case LayerKind::relu:
    case LayerKind::batchnorm: {
      Rng unused;  // neither kind draws random numbers
      return make_layer(spec, unused);
    }
  }
  throw ConfigError("make_layer_shell: unknown layer kind");
}

// ---- linear ----

LinearLayer::LinearLayer(Matrix w, std::vector<double> b,
                         std::optional<std::vector<double>> scale)
    : w_(std::move(w)),
      dw_(w_.rows(), w_.cols()),
      b_(std::move(b)),
      db_(b_.size(), 0.0),
      scale_(std::move(scale)) {
  if (b_.size() != w_.rows()) throw DimensionError("LinearLayer: bias length mismatch");
  if (scale_) {
    if (scale_->size() != w_.rows()) throw DimensionError("LinearLayer: scale length mismatch");
    dscale_ = std::vector<double>(scale_->size(), 0.0);
  }
}

LayerSpec LinearLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::linear;
  s.in_dim = w_.cols();
  s.out_dim = w_.rows();
  s.scale = scale_.has_value();
  return s;
}

Matrix LinearLayer::forward(const Matrix& x, bool) {
  require_rows("linear forward", x, w_.cols());
  x_ = x;
  wx_ = matmul(w_, x);
  return olm::finish_affine(wx_, b_, scale_);
}

Matrix LinearLayer::backward(const Matrix& dy) {
  require_same("linear backward", dy, w_.rows(), x_.cols());
  db_ = row_sums(dy);
  if (!scale_) {
    dw_ = matmul_nt(dy, x_);
    return matmul_tn(w_, dy);
  }
  Matrix scaled = dy;
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    auto d = dy.row(i);
    auto wx = wx_.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) acc += d[j] * wx[j];
    (*dscale_)[i] = acc;
    for (double& v : scaled.row(i)) v *= (*scale_)[i];
  }
  dw_ = matmul_nt(scaled, x_);
  return matmul_tn(w_, scaled);
}

std::vector<ParamView> LinearLayer::params() {
  std::vector<ParamView> out{{"w", w_.data(), dw_.data(), true},
                             {"b", span_of(b_), span_of(db_), true}};
  if (scale_) out.push_back({"g", span_of(*scale_), span_of(*dscale_), true});
  return out;
}

std::vector<std::span<double>> LinearLayer::state() {
  std::vector<std::span<double>> out{w_.data(), span_of(b_)};
  if (scale_) out.push_back(span_of(*scale_));
  return out;
}

std::unique_ptr<Layer> LinearLayer::clone() const {
  return std::make_unique<LinearLayer>(*this);
}

// ---- weight normalization ----

WnLinearLayer::WnLinearLayer(Matrix v, std::vector<double> g, std::vector<double> b)
    : v_(std::move(v)),
      dv_(v_.rows(), v_.cols()),
      g_(std::move(g)),
      dg_(g_.size(), 0.0),
      b_(std::move(b)),
      db_(b_.size(), 0.0) {
  if (g_.size() != v_.rows() || b_.size() != v_.rows()) {
    throw DimensionError("WnLinearLayer: scale/bias length mismatch");
  }
}

LayerSpec WnLinearLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::wn_linear;
  s.in_dim = v_.cols();
  s.out_dim = v_.rows();
  return s;
}

Matrix WnLinearLayer::effective_weight() const {
  Matrix w = v_;
  for (std::size_t i = 0; i < v_.rows(); ++i) {
    double sq = 0.0;
    for (double x : v_.row(i)) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!(norm > 1e-12)) {
      throw ValueError("WnLinearLayer: row " + std::to_string(i) + " of v has zero norm");
    }
    for (double& x : w.row(i)) x *= g_[i] / norm;
  }
  return w;
}

Matrix WnLinearLayer::forward(const Matrix& x, bool) {
  require_rows("wn_linear forward", x, v_.cols());
  w_ = effective_weight();
  norms_.assign(v_.rows(), 0.0);
  for (std::size_t i = 0; i < v_.rows(); ++i) {
    double sq = 0.0;
    for (double e : v_.row(i)) sq += e * e;
    norms_[i] = std::sqrt(sq);
  }
  x_ = x;
  return affine(w_, x, b_);
}

Matrix WnLinearLayer::backward(const Matrix& dy) {
  require_same("wn_linear backward", dy, v_.rows(), x_.cols());
  const Matrix dw = matmul_nt(dy, x_);
  db_ = row_sums(dy);
  dv_ = Matrix(v_.rows(), v_.cols());
  for (std::size_t i = 0; i < v_.rows(); ++i) {
    const double inv = 1.0 / norms_[i];
    auto vi = v_.row(i);
    auto gi = dw.row(i);
    double proj = 0.0;  // dW_i · v̂_i
    for (std::size_t j = 0; j < vi.size(); ++j) proj += gi[j] * vi[j] * inv;
    dg_[i] = proj;
    auto out = dv_.row(i);
    for (std::size_t j = 0; j < vi.size(); ++j) {
      out[j] = g_[i] * inv * (gi[j] - proj * vi[j] * inv);
    }
  }
  return matmul_tn(w_, dy);
}

std::vector<ParamView> WnLinearLayer::params() {
  return {{"v", v_.data(), dv_.data(), true},
          {"g", span_of(g_), span_of(dg_), true},
          {"b", span_of(b_), span_of(db_), true}};
}

std::vector<std::span<double>> WnLinearLayer::state() {
  return {v_.data(), span_of(g_), span_of(b_)};
}

std::unique_ptr<Layer> WnLinearLayer::clone() const {
  return std::make_unique<WnLinearLayer>(*this);
}

// ---- OLM ----

OlmLinearLayer::OlmLinearLayer(olm::OlmParams p, bool decay_proxy)
    : p_(std::move(p)), decay_proxy_(decay_proxy) {
  grads_.v = Matrix(p_.v.rows(), p_.v.cols());
  grads_.bias.assign(p_.bias.size(), 0.0);
  if (p_.scale) grads_.scale = std::vector<double>(p_.scale->size(), 0.0);
}

LayerSpec OlmLinearLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::olm_linear;
  s.in_dim = p_.in_dim();
  s.out_dim = p_.out_dim();
  s.group_size = p_.group_size;
  s.scale = p_.scale.has_value();
  s.orth = p_.kind;
  s.ridge = p_.ridge;
  s.decay_proxy = decay_proxy_;
  return s;
}

Matrix OlmLinearLayer::forward(const Matrix& x, bool) {
  olm::OlmForward f = olm::olm_forward(p_, x);
  cache_ = std::move(f.cache);
  return std::move(f.s);
}

Matrix OlmLinearLayer::backward(const Matrix& dy) {
  grads_ = olm::olm_backward(dy, cache_, p_);
  return std::move(grads_.h);
}

std::vector<ParamView> OlmLinearLayer::params() {
  std::vector<ParamView> out{{"v", p_.v.data(), grads_.v.data(), decay_proxy_},
                             {"b", span_of(p_.bias), span_of(grads_.bias), true}};
  if (p_.scale) out.push_back({"g", span_of(*p_.scale), span_of(*grads_.scale), true});
  return out;
}

std::vector<std::span<double>> OlmLinearLayer::state() {
  std::vector<std::span<double>> out{p_.v.data(), span_of(p_.bias)};
  if (p_.scale) out.push_back(span_of(*p_.scale));
  return out;
}

std::unique_ptr<Layer> OlmLinearLayer::clone() const {
  return std::make_unique<OlmLinearLayer>(*this);
}

// ---- Stiefel baselines ----

StiefelLinearLayer::StiefelLinearLayer(Matrix w, std::vector<double> b,
                                       std::size_t group_size, stiefel::Method method)
    : w_(std::move(w)),
      dw_(w_.rows(), w_.cols()),
      b_(std::move(b)),
      db_(b_.size(), 0.0),
      group_size_(group_size),
      method_(method) {
  if (b_.size() != w_.rows()) throw DimensionError("StiefelLinearLayer: bias length mismatch");
  if (group_size_ == 0 || group_size_ > w_.cols()) {
    throw DimensionError("StiefelLinearLayer: group size must be in [1, in_dim]");
  }
}

LayerSpec StiefelLinearLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::stiefel_linear;
  s.in_dim = w_.cols();
  s.out_dim = w_.rows();
  s.group_size = group_size_;
  s.manifold = method_;
  return s;
}

Matrix StiefelLinearLayer::forward(const Matrix& x, bool) {
  require_rows("stiefel_linear forward", x, w_.cols());
  x_ = x;
  return affine(w_, x, b_);
}

Matrix StiefelLinearLayer::backward(const Matrix& dy) {
  require_same("stiefel_linear backward", dy, w_.rows(), x_.cols());
  dw_ = matmul_nt(dy, x_);
  db_ = row_sums(dy);
  return matmul_tn(w_, dy);
}

std::vector<ParamView> StiefelLinearLayer::params() {
  return {{"b", span_of(b_), span_of(db_), true}};
}

std::vector<std::span<double>> StiefelLinearLayer::state() {
  return {w_.data(), span_of(b_)};
}

void StiefelLinearLayer::manifold_step(double lr) {
  if (!all_finite(dw_)) throw DivergenceError("stiefel_linear: non-finite weight gradient");
  for (const olm::RowGroup& g : olm::partition_rows(w_.rows(), group_size_)) {
    const stiefel::StiefelState s{w_.row_block(g.first, g.count),
                                  stiefel::Convention::row_orthonormal};
    w_.set_row_block(g.first, stiefel::step(method_, s, dw_.row_block(g.first, g.count), lr).w);
  }
  if (!all_finite(w_)) throw DivergenceError("stiefel_linear: step produced non-finite weights");
}

std::unique_ptr<Layer> StiefelLinearLayer::clone() const {
  return std::make_unique<StiefelLinearLayer>(*this);
}

// ---- ReLU ----

LayerSpec ReluLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::relu;
  s.in_dim = s.out_dim = dim_;
  return s;
}

Matrix ReluLayer::forward(const Matrix& x, bool) {
  require_rows("relu forward", x, dim_);
  x_ = x;
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix ReluLayer::backward(const Matrix& dy) {
  require_same("relu backward", dy, dim_, x_.cols());
  Matrix dx = dy;
  auto xs = x_.data();
  auto ds = dx.data();
  for (std::size_t k = 0; k < ds.size(); ++k)
    if (!(xs[k] > 0.0)) ds[k] = 0.0;
  return dx;
}

std::unique_ptr<Layer> ReluLayer::clone() const { return std::make_unique<ReluLayer>(*this); }

// ---- batch normalization ----

BatchNormLayer::BatchNormLayer(std::size_t dim, double eps, double momentum)
    : dim_(dim),
      eps_(eps),
      momentum_(momentum),
      gamma_(dim, 1.0),
      beta_(dim, 0.0),
      dgamma_(dim, 0.0),
      dbeta_(dim, 0.0),
      running_mean_(dim, 0.0),
      running_var_(dim, 1.0) {}

LayerSpec BatchNormLayer::spec() const {
  LayerSpec s;
  s.kind = LayerKind::batchnorm;
  s.in_dim = s.out_dim = dim_;
  s.bn_eps = eps_;
  s.bn_momentum = momentum_;
  return s;
}

Matrix BatchNormLayer::forward(const Matrix& x, bool train) {
  require_rows("batchnorm forward", x, dim_);
  const std::size_t m = x.cols();
  last_train_ = train;
  xhat_ = Matrix(dim_, m);
  inv_std_.assign(dim_, 0.0);
  Matrix y(dim_, m);
  if (train && m < 2) throw ValueError("batchnorm: training needs at least 2 samples");
  for (std::size_t i = 0; i < dim_; ++i) {
    auto xi = x.row(i);
    double mean, var;
    if (train) {
      mean = 0.0;
      for (double v : xi) mean += v;
      mean /= static_cast<double>(m);
      var = 0.0;
      for (double v : xi) var += (v - mean) * (v - mean);
      var /= static_cast<double>(m);
      const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
      running_mean_[i] = (1.0 - momentum_) * running_mean_[i] + momentum_ * mean;
      running_var_[i] = (1.0 - momentum_) * running_var_[i] + momentum_ * unbiased;
    } else {
      mean = running_mean_[i];
      var = running_var_[i];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[i] = inv;
    auto xh = xhat_.row(i);
    auto yi = y.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      xh[j] = (xi[j] - mean) * inv;
      yi[j] = gamma_[i] * xh[j] + beta_[i];
    }
  }
  return y;
}

Matrix BatchNormLayer::backward(const Matrix& dy) {
  require_same("batchnorm backward", dy, dim_, xhat_.cols());
  const std::size_t m = dy.cols();
  const double md = static_cast<double>(m);
  Matrix dx(dim_, m);
  for (std::size_t i = 0; i < dim_; ++i) {
    auto di = dy.row(i);
    auto xh = xhat_.row(i);
    double sum = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      sum += di[j];
      dot += di[j] * xh[j];
    }
    dbeta_[i] = sum;
    dgamma_[i] = dot;
    auto out = dx.row(i);
    const double k = gamma_[i] * inv_std_[i];
    if (last_train_) {
      for (std::size_t j = 0; j < m; ++j) out[j] = k * (di[j] - sum / md - xh[j] * dot / md);
    } else {
      for (std::size_t j = 0; j < m; ++j) out[j] = k * di[j];
    }
  }
  return dx;
}

std::vector<ParamView> BatchNormLayer::params() {
  return {{"gamma", span_of(gamma_), span_of(dgamma_), true},
          {"beta", span_of(beta_), span_of(dbeta_), true}};
}

std::vector<std::span<double>> BatchNormLayer::state() {
  return {span_of(gamma_), span_of(beta_), span_of(running_mean_), span_of(running_var_)};
}

std::unique_ptr<Layer> BatchNormLayer::clone() const {
  return std::make_unique<BatchNormLayer>(*this);
}

}  // namespace own::nn
