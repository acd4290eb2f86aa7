#include "own/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <string>

#include "own/errors.hpp"

namespace own::harness {

namespace {

constexpr char kMagic[4] = {'O', 'L', 'M', '1'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    u64(bits);
  }
  void array(std::span<const double> a) {
    u64(a.size());
    for (double d : a) f64(d);
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Parser {
 public:
  explicit Parser(std::span<const unsigned char> b) : b_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * k);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::vector<double> array() {
    const std::uint64_t n = u64();
    if (n > (b_.size() - pos_) / 8) {
      throw LengthError("checkpoint: array of " + std::to_string(n) +
                        " doubles runs past the end of the data");
    }
    std::vector<double> out(n);
    for (double& d : out) d = f64();
    return out;
  }
  bool at_end() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw LengthError("checkpoint: truncated at byte " + std::to_string(pos_));
    }
  }

 private:
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

std::uint32_t flags_of(const nn::LayerSpec& s) {
  std::uint32_t f = 0;
  if (s.scale) f |= 1u;
  if (s.orth == olm::OrthKind::eigenbasis) f |= 2u;
  if (s.decay_proxy) f |= 4u;
  f |= static_cast<std::uint32_t>(s.manifold) << 8;
  return f;
}

}  // namespace

std::vector<unsigned char> checkpoint_bytes(nn::Network& net) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(net.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    nn::Layer& layer = net.layer(i);
    const nn::LayerSpec s = layer.spec();
    const bool grouped =
        s.kind == nn::LayerKind::olm_linear || s.kind == nn::LayerKind::stiefel_linear;
    w.u32(static_cast<std::uint32_t>(s.kind));
    w.u64(s.in_dim);
    w.u64(s.out_dim);
    w.u64(grouped ? s.groups_of() : 0);
    w.u32(flags_of(s));
    const auto state = layer.state();
    w.u32(static_cast<std::uint32_t>(state.size() + 1));
    const double hyper[] = {s.ridge.coefficient, s.ridge.relative ? 1.0 : 0.0, s.bn_eps,
                            s.bn_momentum};
    w.array(hyper);
    for (std::span<double> a : state) w.array(a);
  }
  return w.take();
}

nn::Network parse_checkpoint(std::span<const unsigned char> bytes) {
  Parser p(bytes);
  p.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic (expected OLM1)");
  }
  p.u32();  // consumes the magic
  const std::uint32_t count = p.u32();
  std::vector<std::unique_ptr<nn::Layer>> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "checkpoint layer " + std::to_string(i) + ": ";
    nn::LayerSpec s;
    const std::uint32_t kind = p.u32();
    if (kind < 1 || kind > 6) throw FormatError(where + "unknown kind " + std::to_string(kind));
    s.kind = static_cast<nn::LayerKind>(kind);
    s.in_dim = p.u64();
    s.out_dim = p.u64();
    s.group_size = p.u64();
    const std::uint32_t flags = p.u32();
    s.scale = flags & 1u;
    s.orth = (flags & 2u) ? olm::OrthKind::eigenbasis : olm::OrthKind::minimal_distortion;
    s.decay_proxy = flags & 4u;
    const std::uint32_t manifold = (flags >> 8) & 0xffu;
    if (manifold > static_cast<std::uint32_t>(stiefel::Method::qr_projection)) {
      throw FormatError(where + "unknown manifold rule " + std::to_string(manifold));
    }
    s.manifold = static_cast<stiefel::Method>(manifold);
    const std::uint32_t arrays = p.u32();
    if (arrays == 0) throw FormatError(where + "missing hyperparameter array");
    const std::vector<double> hyper = p.array();
    if (hyper.size() != 4) throw FormatError(where + "hyperparameter array has wrong length");
    s.ridge.coefficient = hyper[0];
    s.ridge.relative = hyper[1] != 0.0;
    s.bn_eps = hyper[2];
    s.bn_momentum = hyper[3];
    std::unique_ptr<nn::Layer> layer;
    try {
      layer = nn::make_layer_shell(s);
    } catch (const ConfigError& e) {
      throw FormatError(where + e.what());
    }
    auto state = layer->state();
    if (state.size() + 1 != arrays) {
      throw FormatError(where + std::to_string(arrays - 1) + " state arrays, layer has " +
                        std::to_string(state.size()));
    }
    for (std::span<double> dst : state) {
      const std::vector<double> src = p.array();
      if (src.size() != dst.size()) {
        throw FormatError(where + "array of " + std::to_string(src.size()) + " values, expected " +
                          std::to_string(dst.size()));
      }
      std::copy(src.begin(), src.end(), dst.begin());
    }
    layers.push_back(std::move(layer));
  }
  if (!p.at_end()) {
    throw LengthError("checkpoint: " + std::to_string(bytes.size() - p.pos()) +
                      " trailing bytes");
  }
  try {
    return nn::Network(std::move(layers));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, nn::Network& net) {
  const auto bytes = checkpoint_bytes(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write checkpoint " + path.string());
}

nn::Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

nn::Network export_inference(nn::Network& net) {
  std::vector<std::unique_ptr<nn::Layer>> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    nn::Layer& layer = net.layer(i);
    if (auto* o = dynamic_cast<nn::OlmLinearLayer*>(&layer)) {
      olm::LinearWeights lw = olm::export_weights(o->olm_params());
      out.push_back(std::make_unique<nn::LinearLayer>(std::move(lw.w), std::move(lw.bias),
                                                      std::move(lw.scale)));
    } else if (auto* s = dynamic_cast<nn::StiefelLinearLayer*>(&layer)) {
      auto state = s->state();
      std::vector<double> bias(state[1].begin(), state[1].end());
      out.push_back(std::make_unique<nn::LinearLayer>(s->weight(), std::move(bias)));
    } else if (auto* w = dynamic_cast<nn::WnLinearLayer*>(&layer)) {
      auto state = w->state();
      std::vector<double> bias(state[2].begin(), state[2].end());
      out.push_back(std::make_unique<nn::LinearLayer>(w->effective_weight(), std::move(bias)));
    } else {
      out.push_back(layer.clone());
    }
  }
  return nn::Network(std::move(out));
}

}  // namespace own::harness
