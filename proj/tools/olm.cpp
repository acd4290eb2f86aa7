#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "own/errors.hpp"
#include "own/harness/checkpoint.hpp"
#include "own/harness/config.hpp"
#include "own/harness/experiment.hpp"
#include "own/harness/verify.hpp"

namespace {

namespace fs = std::filesystem;
using namespace own::harness;

struct Common {
  std::string config;
  std::string dataset_dir;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App& app, Common& c) {
  app.add_option("--config", c.config, "key=value run configuration");
  app.add_option("--dataset-dir", c.dataset_dir, "directory with the MNIST IDX files");
  app.add_option("--out-dir", c.out_dir, "directory for CSV curves, checkpoints and summary")
      ->capture_default_str();
  app.add_option("--seed", c.seed, "overrides the config seed");
  app.add_option("--jobs", c.jobs, "parallel runs")->capture_default_str()->check(
      CLI::PositiveNumber);
}

RunConfig resolve(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (!c.dataset_dir.empty()) rc.dataset_dir = c.dataset_dir;
  if (c.seed) rc.seed = *c.seed;
  rc.validate();
  return rc;
}

void print_run(const RunResult& r) {
  std::printf("%-8s lr=%-7s %s  epochs=%zu  train_loss=%s  test_err=%s  %.1fs\n",
              std::string(method_name(r.method)).c_str(), format_real(r.lr).c_str(),
              r.diverged ? "DIVERGED" : "ok      ", r.rows.size(),
              format_csv_real(r.final_train_loss()).c_str(),
              r.rows.empty() ? "nan" : format_csv_real(r.rows.back().test_err).c_str(),
              r.wall_seconds);
}

int sweep_command(const Common& c, std::optional<std::string> method, std::vector<double> lrs) {
  RunConfig rc = resolve(c);
  if (method) rc.methods = {parse_method(*method)};
  if (!lrs.empty()) rc.lr_grid = lrs;
  rc.validate();
  const Datasets ds = load_datasets(rc);
  std::printf("train %zu × %zu, test %zu, %zu run(s) on %zu job(s)\n", ds.train.count(),
              ds.train.dim(), ds.test.count(), rc.methods.size() * rc.lr_grid.size(), c.jobs);
  const SweepResult s = run_sweep(rc, ds, c.out_dir, c.jobs);
  for (const RunResult& r : s.runs) print_run(r);
  std::cout << '\n' << summary_text(s);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orthogonal linear module experiments"};
  app.require_subcommand(1);

  Common run_opts;
  std::optional<std::string> run_method;
  std::vector<double> run_lrs;
  CLI::App* run = app.add_subcommand("run", "train one method at each learning rate");
  add_common(*run, run_opts);
  run->add_option("--method", run_method, "method (default: first in the config)");
  run->add_option("--lr", run_lrs, "learning rate(s) replacing the config grid");

  Common sweep_opts;
  CLI::App* sweep =
      app.add_subcommand("sweep", "train every method × learning rate and pick the best");
  add_common(*sweep, sweep_opts);

  std::vector<std::string> suites;
  std::uint64_t verify_seed = 1;
  CLI::App* verify = app.add_subcommand("verify", "run property suites");
  verify->add_option("suites", suites, "suite names or 'all'")->required();
  verify->add_option("--seed", verify_seed, "seed of the first instance")->capture_default_str();

  std::string ckpt_in, ckpt_out;
  CLI::App* exp = app.add_subcommand("export", "convert a checkpoint to plain linear layers");
  exp->add_option("--checkpoint", ckpt_in, "trained checkpoint")->required();
  exp->add_option("--out", ckpt_out, "exported checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig rc = resolve(run_opts);
      const std::string m =
          run_method ? *run_method : std::string(method_name(rc.methods.front()));
      return sweep_command(run_opts, m, run_lrs);
    }
    if (*sweep) return sweep_command(sweep_opts, std::nullopt, {});
    if (*verify) {
      std::vector<Suite> chosen;
      for (const std::string& s : suites) {
        if (s == "all") {
          chosen = all_suites();
          break;
        }
        chosen.push_back(parse_suite(s));
      }
      bool ok = true;
      for (Suite s : chosen) {
        const SuiteReport r = run_suite(s, verify_seed);
        std::cout << format_report(r) << std::flush;
        ok = ok && r.passed();
      }
      return ok ? 0 : 1;
    }
    if (*exp) {
      own::nn::Network net = load_checkpoint(ckpt_in);
      own::nn::Network out = export_inference(net);
      save_checkpoint(ckpt_out, out);
      std::printf("exported %zu layers to %s\n", out.size(), ckpt_out.c_str());
      return 0;
    }
  } catch (const own::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
