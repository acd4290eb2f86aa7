#include "own/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "own/errors.hpp"

namespace own::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double to_real(std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(v) + "' is not a number");
  }
  return out;
}

std::uint64_t to_count(std::string_view v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(v) + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + std::string(v) + "' is not a boolean");
}

nn::OptimizerKind to_optimizer(std::string_view v) {
  if (v == "sgd") return nn::OptimizerKind::sgd;
  if (v == "momentum") return nn::OptimizerKind::momentum;
  if (v == "adam") return nn::OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(v) + "'");
}

bool is_manifold(Method m) {
  return m == Method::ei_qr || m == Method::ci_qr || m == Method::cayt || m == Method::qr_proj;
}

using Setter = std::function<void(RunConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"dataset", [](RunConfig& c, std::string_view v) { c.dataset = std::string(v); }},
      {"dataset_dir", [](RunConfig& c, std::string_view v) { c.dataset_dir = std::string(v); }},
      {"synth_classes", [](RunConfig& c, std::string_view v) { c.synth_classes = to_count(v); }},
      {"synth_dim", [](RunConfig& c, std::string_view v) { c.synth_dim = to_count(v); }},
      {"synth_per_class",
       [](RunConfig& c, std::string_view v) { c.synth_per_class = to_count(v); }},
      {"synth_test_per_class",
       [](RunConfig& c, std::string_view v) { c.synth_test_per_class = to_count(v); }},
      {"train_limit", [](RunConfig& c, std::string_view v) { c.train_limit = to_count(v); }},
      {"test_limit", [](RunConfig& c, std::string_view v) { c.test_limit = to_count(v); }},
      {"validation_fraction",
       [](RunConfig& c, std::string_view v) { c.validation_fraction = to_real(v); }},
      {"depth", [](RunConfig& c, std::string_view v) { c.depth = to_count(v); }},
      {"width", [](RunConfig& c, std::string_view v) { c.width = to_count(v); }},
      {"method",
       [](RunConfig& c, std::string_view v) {
         c.methods.clear();
         for (auto item : split_list(v)) c.methods.push_back(parse_method(item));
       }},
      {"group_size", [](RunConfig& c, std::string_view v) { c.group_size = to_count(v); }},
      {"scale", [](RunConfig& c, std::string_view v) { c.scale = to_bool(v); }},
      {"batchnorm", [](RunConfig& c, std::string_view v) { c.batchnorm = to_bool(v); }},
      {"ridge", [](RunConfig& c, std::string_view v) { c.ridge = to_real(v); }},
      {"decay_proxy", [](RunConfig& c, std::string_view v) { c.decay_proxy = to_bool(v); }},
      {"optimizer", [](RunConfig& c, std::string_view v) { c.optimizer = to_optimizer(v); }},
      {"momentum", [](RunConfig& c, std::string_view v) { c.momentum = to_real(v); }},
      {"beta1", [](RunConfig& c, std::string_view v) { c.beta1 = to_real(v); }},
      {"beta2", [](RunConfig& c, std::string_view v) { c.beta2 = to_real(v); }},
      {"adam_eps", [](RunConfig& c, std::string_view v) { c.adam_eps = to_real(v); }},
      {"weight_decay", [](RunConfig& c, std::string_view v) { c.weight_decay = to_real(v); }},
      {"lr_grid",
       [](RunConfig& c, std::string_view v) {
         c.lr_grid.clear();
         for (auto item : split_list(v)) c.lr_grid.push_back(to_real(item));
       }},
      {"lr_decay_to", [](RunConfig& c, std::string_view v) { c.lr_decay_to = to_real(v); }},
      {"batch_size", [](RunConfig& c, std::string_view v) { c.batch_size = to_count(v); }},
      {"epochs", [](RunConfig& c, std::string_view v) { c.epochs = to_count(v); }},
      {"seed", [](RunConfig& c, std::string_view v) { c.seed = to_count(v); }},
      {"divergence_factor",
       [](RunConfig& c, std::string_view v) { c.divergence_factor = to_real(v); }},
      {"save_checkpoint",
       [](RunConfig& c, std::string_view v) { c.save_checkpoint = to_bool(v); }},
  };
  return table;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::plain: return "plain";
    case Method::wn: return "wn";
    case Method::olm: return "olm";
    case Method::olm_var: return "olm_var";
    case Method::ei_qr: return "ei_qr";
    case Method::ci_qr: return "ci_qr";
    case Method::cayt: return "cayt";
    case Method::qr_proj: return "qr_proj";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::plain, Method::wn, Method::olm, Method::olm_var, Method::ei_qr,
                   Method::ci_qr, Method::cayt, Method::qr_proj}) {
    if (method_name(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string format_real(double v) {
  // Fixed notation keeps grid values readable in file names (0.0005, not
  // 5e-04); values too long for it fall back to the general form.
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (r.ec != std::errc()) r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (dataset != "mnist" && dataset != "synthetic") {
    fail("dataset must be 'mnist' or 'synthetic', got '" + dataset + "'");
  }
  if (dataset == "synthetic" &&
      (synth_classes < 2 || synth_dim == 0 || synth_per_class == 0 || synth_test_per_class == 0)) {
    fail("synthetic data needs >= 2 classes and positive dim and per-class counts");
  }
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    fail("validation_fraction must lie in [0, 1)");
  }
  if (width == 0) fail("width must be positive");
  if (methods.empty()) fail("method list is empty");
  if (group_size == 0) fail("group_size must be positive");
  if (!(ridge >= 0.0)) fail("ridge must be non-negative");
  if (lr_grid.empty()) fail("lr_grid is empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0) || !std::isfinite(lr)) fail("every learning rate must be positive");
  }
  if (!(lr_decay_to > 0.0 && lr_decay_to <= 1.0)) fail("lr_decay_to must lie in (0, 1]");
  if (batch_size == 0) fail("batch_size must be positive");
  if (batchnorm && batch_size < 2) fail("batchnorm needs batch_size >= 2");
  if (epochs == 0) fail("epochs must be >= 1");
  if (!(divergence_factor > 1.0)) fail("divergence_factor must exceed 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
  for (Method m : methods) {
    if (is_manifold(m) && optimizer != nn::OptimizerKind::sgd) {
      fail("method " + std::string(method_name(m)) +
           " steps its weights on the manifold directly and requires optimizer=sgd");
    }
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + "expected key=value, got '" + std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    }
    try {
      it->second(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream os;
  auto list = [](const auto& items, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + fmt(items[i]);
    return s;
  };
  os << "dataset=" << c.dataset << "\n";
  if (!c.dataset_dir.empty()) os << "dataset_dir=" << c.dataset_dir.string() << "\n";
  os << "synth_classes=" << c.synth_classes << "\n"
     << "synth_dim=" << c.synth_dim << "\n"
     << "synth_per_class=" << c.synth_per_class << "\n"
     << "synth_test_per_class=" << c.synth_test_per_class << "\n"
     << "train_limit=" << c.train_limit << "\n"
     << "test_limit=" << c.test_limit << "\n"
     << "validation_fraction=" << format_real(c.validation_fraction) << "\n"
     << "depth=" << c.depth << "\n"
     << "width=" << c.width << "\n"
     << "method="
     << list(c.methods, [](Method m) { return std::string(method_name(m)); }) << "\n"
     << "group_size=" << c.group_size << "\n"
     << "scale=" << (c.scale ? "true" : "false") << "\n"
     << "batchnorm=" << (c.batchnorm ? "true" : "false") << "\n"
     << "ridge=" << format_real(c.ridge) << "\n"
     << "decay_proxy=" << (c.decay_proxy ? "true" : "false") << "\n"
     << "optimizer=" << nn::optimizer_name(c.optimizer) << "\n"
     << "momentum=" << format_real(c.momentum) << "\n"
     << "beta1=" << format_real(c.beta1) << "\n"
     << "beta2=" << format_real(c.beta2) << "\n"
     << "adam_eps=" << format_real(c.adam_eps) << "\n"
     << "weight_decay=" << format_real(c.weight_decay) << "\n"
     << "lr_grid=" << list(c.lr_grid, [](double v) { return format_real(v); }) << "\n"
     << "lr_decay_to=" << format_real(c.lr_decay_to) << "\n"
     << "batch_size=" << c.batch_size << "\n"
     << "epochs=" << c.epochs << "\n"
     << "seed=" << c.seed << "\n"
     << "divergence_factor=" << format_real(c.divergence_factor) << "\n"
     << "save_checkpoint=" << (c.save_checkpoint ? "true" : "false") << "\n";
  return os.str();
}

std::vector<nn::LayerSpec> network_specs(const RunConfig& c, Method m, std::size_t in_dim,
                                         std::size_t classes) {
  nn::MlpSpec mlp;
  mlp.in_dim = in_dim;
  mlp.hidden.assign(c.depth, c.width);
  mlp.classes = classes;
  mlp.batchnorm = c.batchnorm;
  nn::LayerSpec& l = mlp.linear;
  l.group_size = c.group_size;
  switch (m) {
    case Method::plain:
      l.kind = nn::LayerKind::linear;
      break;
    case Method::wn:
      l.kind = nn::LayerKind::wn_linear;
      break;
    case Method::olm:
    case Method::olm_var:
      l.kind = nn::LayerKind::olm_linear;
      l.orth = m == Method::olm ? olm::OrthKind::minimal_distortion : olm::OrthKind::eigenbasis;
      l.scale = c.scale;
      l.ridge = olm::Ridge::relative_to_trace(c.ridge);
      l.decay_proxy = c.decay_proxy;
      break;
    case Method::ei_qr:
    case Method::ci_qr:
    case Method::cayt:
    case Method::qr_proj:
      l.kind = nn::LayerKind::stiefel_linear;
      l.manifold = m == Method::ei_qr   ? stiefel::Method::euclidean_qr
                   : m == Method::ci_qr ? stiefel::Method::canonical_qr
                   : m == Method::cayt  ? stiefel::Method::cayley
                                        : stiefel::Method::qr_projection;
      break;
  }
  return nn::make_mlp_specs(mlp);
}

}  // namespace own::harness
