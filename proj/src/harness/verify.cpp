#include "own/harness/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <sstream>

#include "own/errors.hpp"
#include "own/gradcheck.hpp"
#include "own/harness/checkpoint.hpp"
#include "own/linalg/decompositions.hpp"
#include "own/nn/network.hpp"
#include "own/olm/layer.hpp"
#include "own/random.hpp"
#include "own/stiefel.hpp"

namespace own::harness {

namespace {

constexpr std::uint64_t kOrthStream = 0x6f727468;
constexpr std::uint64_t kGradStream = 0x67726164;
constexpr std::uint64_t kNetStream = 0x6e657467;
constexpr std::uint64_t kDistStream = 0x64697374;
constexpr std::uint64_t kVarStream = 0x76617264;
constexpr std::uint64_t kManStream = 0x6d616e69;
constexpr std::uint64_t kNormStream = 0x6e6f726d;
constexpr std::uint64_t kCovStream = 0x636f7661;
constexpr std::uint64_t kExpStream = 0x6578706f;
constexpr std::uint64_t kCkptStream = 0x636b7074;

// Inclusive integer range; modulo keeps the draw independent of the standard
// library's distribution algorithms.
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<double> gaussian_vector(std::size_t n, Rng& rng, double stddev = 1.0) {
  const Matrix m = gaussian_matrix(1, n, rng, stddev);
  return {m.data().begin(), m.data().end()};
}

Matrix row_vector(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

std::vector<double> to_vector(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

// All entries in one row, in argument order.
Matrix concat(std::initializer_list<Matrix> parts) {
  std::vector<double> out;
  for (const Matrix& m : parts) out.insert(out.end(), m.data().begin(), m.data().end());
  const std::size_t count = out.size();
  return Matrix(1, count, std::move(out));
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

struct Tracker {
  CheckResult& c;
  void record(std::uint64_t seed, double err) {
    ++c.instances;
    c.worst = std::max(c.worst, std::isnan(err) ? INFINITY : err);
    if (!(err < c.tolerance)) c.failing_seeds.push_back(seed);
  }
  void fail(std::uint64_t seed) {
    ++c.instances;
    c.failing_seeds.push_back(seed);
  }
};

CheckResult make_check(std::string name, double tolerance) {
  CheckResult c;
  c.name = std::move(name);
  c.tolerance = tolerance;
  return c;
}

// Group size drawn from {1, 2, n}, clamped to n.
std::size_t pick_group(Rng& rng, std::size_t n) {
  const std::size_t choice = pick(rng, 0, 2);
  const std::size_t g = choice == 0 ? 1 : choice == 1 ? 2 : n;
  return std::min(g, n);
}

// ---- orthogonality ----

SuiteReport orthogonality_suite(std::uint64_t base) {
  CheckResult c = make_check("per-group ||W·Wᵀ − I||_F after forward", 1e-8);
  Tracker t{c};
  std::size_t rejected = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kOrthStream);
    const std::size_t n = pick(rng, 1, 8);
    const std::size_t d = pick(rng, n, 16);
    const std::size_t g = pick_group(rng, n);
    const olm::OlmParams p = olm::make_olm_params(n, d, g, false, rng);
    const Matrix h = gaussian_matrix(d, 3, rng);
    // Centered rows live in a (d − 1)-dimensional subspace, so a group with d
    // rows cannot be orthonormal and must be rejected.
    const bool full_rank = g < d;
    try {
      const olm::OlmForward f = olm::olm_forward(p, h);
      if (!full_rank) {
        t.fail(seed);
        continue;
      }
      double err = 0.0;
      for (const olm::RowGroup& grp : olm::partition_rows(n, g)) {
        err = std::max(err, row_orthonormality_error(f.cache.w.row_block(grp.first, grp.count)));
      }
      t.record(seed, err);
    } catch (const RankError&) {
      if (full_rank) {
        t.fail(seed);
      } else {
        ++c.instances;
        ++rejected;
      }
    }
  }
  c.detail = std::to_string(c.instances - rejected) + " full-rank instances checked, " +
             std::to_string(rejected) + " with a d-row group raised RankError";
  return {Suite::orthogonality, {c}};
}

// ---- gradcheck ----

// Smallest eigenvalue gap of every group covariance, relative to its largest
// eigenvalue.
double min_relative_gap(const olm::OlmParams& p) {
  double gap = INFINITY;
  for (const olm::RowGroup& grp : olm::partition_rows(p.v.rows(), p.group_size)) {
    const olm::GroupCache gc = olm::orthogonalize(p.v.row_block(grp.first, grp.count), p.kind);
    const auto& ev = gc.eig.values;
    for (std::size_t k = 1; k < ev.size(); ++k) gap = std::min(gap, (ev[k - 1] - ev[k]) / ev[0]);
  }
  return gap;
}

double olm_gradient_error(std::uint64_t seed) {
  Rng rng = make_rng(seed, kGradStream);
  const std::size_t n = pick(rng, 1, 4);
  const std::size_t d = pick(rng, n + 1, 8);
  const std::size_t g = pick_group(rng, n);
  const std::size_t m = pick(rng, 1, 4);
  olm::OlmParams p;
  do {
    p = olm::make_olm_params(n, d, g, true, rng);
  } while (min_relative_gap(p) < 1e-3);
  p.kind = seed % 2 == 0 ? olm::OrthKind::minimal_distortion : olm::OrthKind::eigenbasis;
  p.bias = gaussian_vector(n, rng);
  p.scale = gaussian_vector(n, rng);
  const Matrix h = gaussian_matrix(d, m, rng);
  const Matrix r = gaussian_matrix(n, m, rng);

  auto loss = [&](const olm::OlmParams& q, const Matrix& x) {
    return check::inner(olm::olm_forward(q, x).s, r);
  };
  const olm::OlmForward f = olm::olm_forward(p, h);
  const olm::OlmGrads grads = olm::olm_backward(r, f.cache, p);

  // The error is measured over the concatenated gradient (V, b, g, H): a block
  // can be identically zero (n = 1, d = 2 leaves W locally constant), and a
  // per-block relative error would then divide finite-difference noise by ~0.
  const Matrix nv = check::central_difference(
      [&](const Matrix& v) {
        olm::OlmParams q = p;
        q.v = v;
        return loss(q, h);
      },
      p.v);
  const Matrix nh = check::central_difference([&](const Matrix& x) { return loss(p, x); }, h);
  const Matrix nb = check::central_difference(
      [&](const Matrix& b) {
        olm::OlmParams q = p;
        q.bias = to_vector(b);
        return loss(q, h);
      },
      row_vector(p.bias));
  const Matrix ns = check::central_difference(
      [&](const Matrix& s) {
        olm::OlmParams q = p;
        q.scale = to_vector(s);
        return loss(q, h);
      },
      row_vector(*p.scale));
  return check::max_relative_error(concat({grads.v, grads.h, row_vector(grads.bias),
                                           row_vector(*grads.scale)}),
                                   concat({nv, nh, nb, ns}));
}

// OLM(6→4, groups of 2, scale) → relu → OLM(4→3, scale), softmax cross-entropy.
double network_gradient_error(std::uint64_t seed) {
  Rng rng = make_rng(seed, kNetStream);
  nn::LayerSpec first;
  first.kind = nn::LayerKind::olm_linear;
  first.in_dim = 6;
  first.out_dim = 4;
  first.group_size = 2;
  first.scale = true;
  nn::LayerSpec act;
  act.kind = nn::LayerKind::relu;
  act.in_dim = act.out_dim = 4;
  nn::LayerSpec second = first;
  second.in_dim = 4;
  second.out_dim = 3;
  second.group_size = 0;
  nn::Network net({first, act, second}, rng);
  for (nn::ParamView& pv : net.params()) {
    const std::vector<double> noise = gaussian_vector(pv.value.size(), rng, 0.3);
    for (std::size_t k = 0; k < noise.size(); ++k) pv.value[k] += noise[k];
  }
  Matrix x = gaussian_matrix(6, 5, rng);
  std::vector<std::uint32_t> labels(5);
  for (auto& l : labels) l = static_cast<std::uint32_t>(pick(rng, 0, 2));

  auto loss = [&] { return nn::softmax_xent(net.forward(x, true), labels).loss; };
  const nn::LossResult res = nn::softmax_xent(net.forward(x, true), labels);
  const Matrix dx = net.backward(res.grad);
  std::vector<std::vector<double>> grads;
  for (const nn::ParamView& pv : net.params()) grads.emplace_back(pv.grad.begin(), pv.grad.end());

  double err = 0.0;
  auto params = net.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    err = std::max(err, check::span_gradient_error(params[k].value, grads[k], loss));
  }
  err = std::max(err, check::span_gradient_error(x.data(), dx.data(), loss));
  return err;
}

SuiteReport gradcheck_suite(std::uint64_t base) {
  CheckResult layer = make_check("olm_backward (V, b, g, H) vs central differences", 1e-5);
  Tracker tl{layer};
  for (std::uint64_t i = 0; i < 50; ++i) tl.record(base + i, olm_gradient_error(base + i));
  CheckResult net = make_check("2-layer OLM network vs central differences", 1e-4);
  Tracker tn{net};
  for (std::uint64_t i = 0; i < 5; ++i) tn.record(base + i, network_gradient_error(base + i));
  return {Suite::gradcheck, {layer, net}};
}

// ---- distortion ----

SuiteReport distortion_suite(std::uint64_t base) {
  CheckResult rot = make_check("no random rotation (1000 per instance) lowers the distortion", 0.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kDistStream);
    const std::size_t n = pick(rng, 1, 5);
    const std::size_t d = pick(rng, n + 1, 10);
    const olm::GroupCache gc = olm::orth_transform(gaussian_matrix(n, d, rng));
    ++rot.instances;
    if (!olm::min_distortion_check(gc.v_c, gc.w, 1000, seed)) {
      rot.failing_seeds.push_back(seed);
      rot.worst += 1.0;
    }
  }

  CheckResult var = make_check("eigenbasis distortion exceeds minimal (3×6)", 1.0);
  var.allowed_failures = 1;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kVarStream);
    const Matrix v = gaussian_matrix(3, 6, rng);
    const olm::GroupCache star = olm::orth_transform(v);
    const olm::GroupCache eig = olm::orth_transform_var(v);
    ++var.instances;
    if (!(olm::distortion(eig.w, eig.v_c) > olm::distortion(star.w, star.v_c))) {
      var.failing_seeds.push_back(seed);
    }
  }
  var.worst = static_cast<double>(var.failing_seeds.size());
  var.detail = std::to_string(var.instances - var.failing_seeds.size()) + "/" +
               std::to_string(var.instances) + " instances exceed, at least 19 required";
  return {Suite::distortion, {rot, var}};
}

// ---- manifold ----

// ‖WᵀZ + ZᵀW‖_F in column convention, ‖Z·Wᵀ + W·Zᵀ‖_F in row convention.
double tangency_residual(const stiefel::StiefelState& s, const Matrix& z) {
  const Matrix a = s.convention == stiefel::Convention::column_orthonormal ? matmul_tn(s.w, z)
                                                                         : matmul_nt(z, s.w);
  return frobenius_norm(a + transpose(a));
}

SuiteReport manifold_suite(std::uint64_t base) {
  using stiefel::Convention;
  const char* names[4] = {"ei_qr step stays orthonormal", "ci_qr step stays orthonormal",
                          "cayley step stays orthonormal", "qr_proj step stays orthonormal"};
  std::vector<CheckResult> steps;
  for (const char* n : names) steps.push_back(make_check(n, 1e-8));
  CheckResult tangent = make_check("Riemannian gradients are tangent (both metrics)", 1e-9);
  CheckResult skew = make_check("Cayley generator satisfies A + Aᵀ = 0 exactly", 0.0);
  skew.detail = "tolerance is exact zero";
  CheckResult cayley_zero = make_check("Cayley step with lr = 0 returns W bit-exactly", 0.0);
  CheckResult qr_zero = make_check("QR-based steps with lr = 0 return W", 1e-12);

  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kManStream);
    const std::size_t small = pick(rng, 1, 6);
    const std::size_t large = pick(rng, small, 10);
    const Convention conv = rng() % 2 == 0 ? Convention::column_orthonormal
                                           : Convention::row_orthonormal;
    Matrix w = qr_unique(gaussian_matrix(large, small, rng)).q;
    if (conv == Convention::row_orthonormal) w = transpose(w);
    const stiefel::StiefelState s{w, conv};
    const Matrix g = gaussian_matrix(w.rows(), w.cols(), rng);
    const double lr = 1e-4 * std::pow(10.0, 4.0 * unit(rng));

    const Matrix ge = stiefel::riem_grad_euclidean(s, g);
    const Matrix gc = stiefel::riem_grad_canonical(s, g);
    Tracker{tangent}.record(seed, std::max(tangency_residual(s, ge), tangency_residual(s, gc)));

    const std::function<stiefel::StiefelState(double)> rules[4] = {
        [&](double r) { return stiefel::qr_retraction_step(s, ge, r); },
        [&](double r) { return stiefel::qr_retraction_step(s, gc, r); },
        [&](double r) { return stiefel::cayley_step(s, g, r); },
        [&](double r) { return stiefel::qr_projection_step(s, g, r); },
    };
    double qr_identity = 0.0;
    for (int k = 0; k < 4; ++k) {
      try {
        Tracker{steps[k]}.record(seed, stiefel::orthonormality_error(rules[k](lr)));
        const Matrix at_zero = rules[k](0.0).w;
        if (k == 2) {
          ++cayley_zero.instances;
          if (!same_bits(at_zero, w)) cayley_zero.failing_seeds.push_back(seed);
        } else {
          qr_identity = std::max(qr_identity, max_abs(at_zero - w));
        }
      } catch (const Error&) {
        Tracker{steps[k]}.fail(seed);
      }
    }
    Tracker{qr_zero}.record(seed, qr_identity);

    const Matrix a = stiefel::cayley_generator(s, g);
    ++skew.instances;
    const double asym = max_abs(a + transpose(a));
    skew.worst = std::max(skew.worst, asym);
    if (asym != 0.0) skew.failing_seeds.push_back(seed);
  }
  steps.push_back(tangent);
  steps.push_back(skew);
  steps.push_back(cayley_zero);
  steps.push_back(qr_zero);
  return {Suite::manifold, steps};
}

// ---- theorem1 ----

// Square orthogonal W = (V·Vᵀ)^{-1/2}·V. The layer transform centers V first,
// which makes a square W singular, so the square-case identities are checked
// on the uncentered whitening of the same form.
Matrix square_whitening(const Matrix& v) {
  const EigPair e = sym_eig(matmul_nt(v, v));
  Matrix scaled = e.vectors;
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    for (std::size_t j = 0; j < scaled.cols(); ++j) scaled(i, j) /= std::sqrt(e.values[j]);
  }
  return matmul(matmul_nt(scaled, e.vectors), v);
}

double norm(const Matrix& m) { return frobenius_norm(m); }

SuiteReport theorem1_suite(std::uint64_t base) {
  CheckResult fwd = make_check("square W: | ||W·x|| − ||x|| |", 1e-10);
  CheckResult bwd = make_check("square W: | ||Wᵀ·g|| − ||g|| |", 1e-10);
  CheckResult rect = make_check("OLM W (n < d): | ||Wᵀ·g|| − ||g|| |", 1e-10);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kNormStream);
    const std::size_t n = pick(rng, 2, 8);
    const Matrix w = square_whitening(gaussian_matrix(n, n, rng));
    const Matrix x = gaussian_matrix(n, 1, rng);
    const Matrix g = gaussian_matrix(n, 1, rng);
    Tracker{fwd}.record(seed, std::abs(norm(matmul(w, x)) - norm(x)));
    Tracker{bwd}.record(seed, std::abs(norm(matmul_tn(w, g)) - norm(g)));

    const std::size_t d = pick(rng, n + 1, 12);
    const Matrix wr = olm::orth_transform(gaussian_matrix(n, d, rng)).w;
    const Matrix gr = gaussian_matrix(n, 1, rng);
    Tracker{rect}.record(seed, std::abs(norm(matmul_tn(wr, gr)) - norm(gr)));
  }

  // cov(W·x) for x ~ N(0, σ²I) with a square W, checked entrywise against
  // 3σ²/√N using the known zero mean.
  constexpr std::size_t kSamples = 100000;
  constexpr std::size_t kDim = 4;
  constexpr double kSigma = 1.5;
  const double bound = 3.0 * kSigma * kSigma / std::sqrt(static_cast<double>(kSamples));
  CheckResult cov = make_check("square W: cov(W·x) = σ²I per entry, N = 1e5", bound);
  {
    Rng rng = make_rng(base, kCovStream);
    const Matrix w = square_whitening(gaussian_matrix(kDim, kDim, rng));
    const Matrix x = gaussian_matrix(kDim, kSamples, rng, kSigma);
    const Matrix s = matmul(w, x);
    Matrix c = matmul_nt(s, s) * (1.0 / static_cast<double>(kSamples));
    for (std::size_t k = 0; k < kDim; ++k) c(k, k) -= kSigma * kSigma;
    Tracker{cov}.record(base, max_abs(c));
    cov.detail = "σ = 1.5, dimension 4";
  }
  return {Suite::theorem1, {fwd, bwd, rect, cov}};
}

// ---- inference_equiv ----

SuiteReport inference_suite(std::uint64_t base) {
  CheckResult lin = make_check("export_weights + linear_apply ≡ olm_forward (10 batches)", 0.0);
  lin.detail = "bit-exact";
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kExpStream);
    const std::size_t n = pick(rng, 1, 12);
    const std::size_t d = pick(rng, n + 1, 16);
    const std::size_t g = pick(rng, 1, n);
    olm::OlmParams p = olm::make_olm_params(n, d, g, rng() % 2 == 0, rng);
    p.kind = rng() % 2 == 0 ? olm::OrthKind::minimal_distortion : olm::OrthKind::eigenbasis;
    p.bias = gaussian_vector(n, rng);
    if (p.scale) p.scale = gaussian_vector(n, rng);
    const olm::LinearWeights lw = olm::export_weights(p);
    bool ok = true;
    for (int b = 0; b < 10; ++b) {
      const Matrix h = gaussian_matrix(d, pick(rng, 1, 8), rng);
      ok = ok && same_bits(olm::olm_forward(p, h).s, olm::linear_apply(lw, h));
    }
    ++lin.instances;
    if (!ok) lin.failing_seeds.push_back(seed);
  }

  CheckResult net = make_check("checkpoint + exported network ≡ OLM network (10 batches)", 0.0);
  net.detail = "bit-exact";
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::uint64_t seed = base + i;
    Rng rng = make_rng(seed, kCkptStream);
    nn::MlpSpec mlp;
    // Each layer narrows, so every OLM group is smaller than its input.
    mlp.in_dim = pick(rng, 5, 12);
    const std::size_t h0 = pick(rng, 3, mlp.in_dim - 1);
    const std::size_t h1 = pick(rng, 2, h0 - 1);
    mlp.hidden = {h0, h1};
    mlp.classes = pick(rng, 1, h1 - 1);
    mlp.linear.kind = nn::LayerKind::olm_linear;
    mlp.linear.group_size = pick(rng, 1, 4);
    mlp.linear.scale = rng() % 2 == 0;
    mlp.linear.orth = rng() % 2 == 0 ? olm::OrthKind::minimal_distortion
                                     : olm::OrthKind::eigenbasis;
    nn::Network original(nn::make_mlp_specs(mlp), rng);
    for (nn::ParamView& pv : original.params()) {
      const std::vector<double> noise = gaussian_vector(pv.value.size(), rng, 0.2);
      for (std::size_t k = 0; k < noise.size(); ++k) pv.value[k] += noise[k];
    }
    nn::Network restored = parse_checkpoint(checkpoint_bytes(original));
    nn::Network exported = export_inference(restored);
    bool ok = true;
    for (int b = 0; b < 10; ++b) {
      const Matrix h = gaussian_matrix(mlp.in_dim, pick(rng, 1, 8), rng);
      ok = ok && same_bits(original.forward(h, false), exported.forward(h, false));
    }
    ++net.instances;
    if (!ok) net.failing_seeds.push_back(seed);
  }
  return {Suite::inference_equiv, {lin, net}};
}

}  // namespace

std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::orthogonality: return "orthogonality";
    case Suite::gradcheck: return "gradcheck";
    case Suite::distortion: return "distortion";
    case Suite::manifold: return "manifold";
    case Suite::theorem1: return "theorem1";
    case Suite::inference_equiv: return "inference_equiv";
  }
  return "unknown";
}

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> suites = {Suite::orthogonality, Suite::gradcheck,
                                            Suite::distortion,    Suite::manifold,
                                            Suite::theorem1,      Suite::inference_equiv};
  return suites;
}

Suite parse_suite(std::string_view name) {
  for (Suite s : all_suites()) {
    if (suite_name(s) == name) return s;
  }
  throw ConfigError("unknown verify suite '" + std::string(name) + "'");
}

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed(); });
}

SuiteReport run_suite(Suite s, std::uint64_t base_seed) {
  switch (s) {
    case Suite::orthogonality: return orthogonality_suite(base_seed);
    case Suite::gradcheck: return gradcheck_suite(base_seed);
    case Suite::distortion: return distortion_suite(base_seed);
    case Suite::manifold: return manifold_suite(base_seed);
    case Suite::theorem1: return theorem1_suite(base_seed);
    case Suite::inference_equiv: return inference_suite(base_seed);
  }
  throw ConfigError("unknown verify suite");
}

std::string format_report(const SuiteReport& r) {
  std::ostringstream o;
  o << "suite " << suite_name(r.suite) << ": " << (r.passed() ? "PASS" : "FAIL") << '\n';
  for (const CheckResult& c : r.checks) {
    char nums[96];
    std::snprintf(nums, sizeof nums, "%zu instances, worst %.3g, tolerance %.3g", c.instances,
                  c.worst, c.tolerance);
    o << "  " << (c.passed() ? "PASS" : "FAIL") << "  " << c.name << ": " << nums;
    if (!c.detail.empty()) o << " (" << c.detail << ')';
    o << '\n';
    if (!c.failing_seeds.empty()) {
      o << "        failing seeds:";
      for (std::uint64_t s : c.failing_seeds) o << ' ' << s;
      o << '\n';
    }
  }
  return o.str();
}

}  // namespace own::harness
