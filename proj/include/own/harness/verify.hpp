#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace own::harness {

enum class Suite { orthogonality, gradcheck, distortion, manifold, theorem1, inference_equiv };

std::string_view suite_name(Suite s);
// ConfigError for an unknown name.
Suite parse_suite(std::string_view name);
const std::vector<Suite>& all_suites();

// One property evaluated over seeded instances. `worst` is the largest error
// measured against `tolerance`; for pass/fail properties it is the number of
// failing instances.
struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  std::size_t allowed_failures = 0;
  std::vector<std::uint64_t> failing_seeds;
  std::string detail;

  bool passed() const { return failing_seeds.size() <= allowed_failures; }
};

struct SuiteReport {
  Suite suite = Suite::orthogonality;
  std::vector<CheckResult> checks;

  bool passed() const;
};

// Instance i of a check uses seed base_seed + i, so a failing seed printed in
// a report reproduces that instance.
SuiteReport run_suite(Suite s, std::uint64_t base_seed = 1);

// One line per check plus the failing seeds.
std::string format_report(const SuiteReport& r);

}  // namespace own::harness
