#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "own/data.hpp"
#include "own/harness/config.hpp"

namespace own::harness {

struct Datasets {
  data::Dataset train;
  data::Dataset test;  // the validation split when validation_fraction > 0
};

// MNIST from dataset_dir or synthetic Gaussians, then the optional limits and
// validation split. Everything is seeded by c.seed.
Datasets load_datasets(const RunConfig& c);

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_err = 0.0;
  double test_err = 0.0;  // NaN on the diverged row
  bool diverged = false;
};

struct RunResult {
  Method method = Method::olm;
  double lr = 0.0;
  std::vector<EpochRow> rows;  // one per attempted epoch; a diverged row ends the run
  bool diverged = false;
  std::size_t diverged_epoch = 0;
  std::string reason;
  double wall_seconds = 0.0;
  std::filesystem::path csv_path;
  std::filesystem::path checkpoint_path;  // empty when none was written

  double final_train_loss() const;
};

// Per-run outputs; an empty path disables that output.
struct RunOutputs {
  std::filesystem::path csv;
  std::filesystem::path checkpoint;
};

// "run_<method>_lr<lr>" with the shortest round-trip lr text.
std::string run_stem(Method m, double lr);

// Trains one network for one learning rate. Divergence is recorded in the
// result and the CSV, never thrown. Each CSV row is flushed as produced.
RunResult run_experiment(const RunConfig& c, const Datasets& ds, Method m, double lr,
                         const RunOutputs& out = {});

// Learning rate used during epoch (0-based) under the exponential decay rule.
double epoch_lr(const RunConfig& c, double lr, std::size_t epoch);

// "%.17g" with non-finite values written as nan, inf, -inf.
std::string format_csv_real(double v);

struct MethodSummary {
  Method method = Method::olm;
  std::optional<std::size_t> best;  // index into SweepResult::runs; empty = no stable lr
  std::vector<double> diverged_lrs;
};

struct SweepResult {
  std::vector<RunResult> runs;  // methods × lr_grid, method-major
  std::vector<MethodSummary> summary;

  const RunResult* best_run(Method m) const;
};

// Best lr per method: lowest final training loss among runs that did not
// diverge, ties going to the earlier grid entry.
std::vector<MethodSummary> summarize(const std::vector<RunResult>& runs,
                                     const std::vector<Method>& methods);

// Every method × lr on up to `jobs` threads. With a non-empty out_dir each run
// writes its CSV (and checkpoint if enabled) there.
SweepResult run_sweep(const RunConfig& c, const Datasets& ds,
                      const std::filesystem::path& out_dir, std::size_t jobs);

// Structured text: one block per method with best lr, final metrics and the
// diverged learning rates.
std::string summary_text(const SweepResult& s);

// config.txt contents for an output directory: the canonical config preceded
// by comments on preprocessing.
std::string run_metadata(const RunConfig& c);

}  // namespace own::harness
