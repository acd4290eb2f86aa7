#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "own/nn/network.hpp"

namespace own::harness {

enum class Method { plain, wn, olm, olm_var, ei_qr, ci_qr, cayt, qr_proj };

std::string_view method_name(Method m);
// ConfigError for an unknown name.
Method parse_method(std::string_view name);

// Everything a training run depends on. Each field has a key of the same name
// in the key=value config format.
struct RunConfig {
  // data
  std::string dataset = "mnist";  // mnist | synthetic
  std::filesystem::path dataset_dir;
  std::size_t synth_classes = 10;
  std::size_t synth_dim = 20;
  std::size_t synth_per_class = 100;
  std::size_t synth_test_per_class = 20;
  std::size_t train_limit = 0;  // 0 = whole training set
  std::size_t test_limit = 0;
  double validation_fraction = 0.0;  // > 0: held-out split replaces the test set

  // architecture
  std::size_t depth = 4;
  std::size_t width = 100;
  std::vector<Method> methods{Method::olm};
  std::size_t group_size = 50;
  bool scale = false;
  bool batchnorm = false;
  double ridge = 0.0;  // relative to tr(Σ)/n
  bool decay_proxy = false;

  // optimization
  nn::OptimizerKind optimizer = nn::OptimizerKind::sgd;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::vector<double> lr_grid{0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1, 5};
  double lr_decay_to = 1.0;  // final lr as a fraction of the initial one (exponential)
  std::size_t batch_size = 1024;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  double divergence_factor = 10.0;

  // output
  bool save_checkpoint = true;

  // ConfigError describing the first violated constraint.
  void validate() const;
};

// Parses key=value lines; '#' starts a comment, blank lines are ignored.
// Unknown keys, duplicate keys and malformed values are ConfigErrors that
// name the offending line.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& c);

// Layer stack for one method under this config.
std::vector<nn::LayerSpec> network_specs(const RunConfig& c, Method m, std::size_t in_dim,
                                         std::size_t classes);

// Shortest decimal text that round-trips (used for lr values in file names
// and summaries).
std::string format_real(double v);

}  // namespace own::harness
