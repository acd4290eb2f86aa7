#include "own/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "own/errors.hpp"
#include "own/harness/checkpoint.hpp"
#include "own/nn/network.hpp"

namespace own::harness {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kTrainLimit = 0x6c696d74;   // "limt"
constexpr std::uint64_t kTestLimit = 0x6c696d65;    // "lime"

data::Dataset limit(const data::Dataset& ds, std::size_t n, std::uint64_t seed,
                    std::uint64_t stream) {
  if (n == 0 || n >= ds.count()) return ds;
  std::vector<std::size_t> idx = data::permutation(ds.count(), seed, stream);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return data::subset(ds, idx);
}

// Numerical failures that mark a run as diverged instead of aborting it.
template <typename F>
bool numerically_failed(F&& f, std::string& reason) {
  try {
    f();
    return false;
  } catch (const RankError& e) {
    reason = e.what();
  } catch (const SingularityError& e) {
    reason = e.what();
  } catch (const DivergenceError& e) {
    reason = e.what();
  } catch (const ValueError& e) {
    reason = e.what();
  }
  return true;
}

void write_row(std::ofstream& csv, const EpochRow& r) {
  csv << r.epoch << ',' << format_csv_real(r.train_loss) << ',' << format_csv_real(r.train_err)
      << ',' << format_csv_real(r.test_err) << ',' << (r.diverged ? 1 : 0) << '\n';
  csv.flush();
}

}  // namespace

Datasets load_datasets(const RunConfig& c) {
  c.validate();
  Datasets out;
  if (c.dataset == "mnist") {
    if (c.dataset_dir.empty()) throw ConfigError("dataset=mnist needs dataset_dir");
    out.train = data::load_mnist(c.dataset_dir, "train");
    out.test = data::load_mnist(c.dataset_dir, "t10k");
  } else {
    // One draw of per_class + test_per_class samples per class; the tail of
    // each class block becomes the test set so both share the class means.
    const std::size_t per = c.synth_per_class + c.synth_test_per_class;
    const data::Dataset all = data::synth_gaussians(c.synth_classes, c.synth_dim, per, c.seed);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t k = 0; k < c.synth_classes; ++k) {
      for (std::size_t j = 0; j < per; ++j) {
        (j < c.synth_per_class ? train_idx : test_idx).push_back(k * per + j);
      }
    }
    out.train = data::subset(all, train_idx);
    out.test = data::subset(all, test_idx);
  }
  out.train = limit(out.train, c.train_limit, c.seed, kTrainLimit);
  out.test = limit(out.test, c.test_limit, c.seed, kTestLimit);
  if (c.validation_fraction > 0.0) {
    auto [train, val] = data::split_validation(out.train, c.validation_fraction, c.seed);
    out.train = std::move(train);
    out.test = std::move(val);
  }
  // Both sides must agree on the label space.
  const std::size_t classes = std::max(out.train.num_classes, out.test.num_classes);
  out.train.num_classes = out.test.num_classes = classes;
  return out;
}

double RunResult::final_train_loss() const {
  return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : rows.back().train_loss;
}

std::string run_stem(Method m, double lr) {
  return "run_" + std::string(method_name(m)) + "_lr" + format_real(lr);
}

double epoch_lr(const RunConfig& c, double lr, std::size_t epoch) {
  if (c.lr_decay_to == 1.0 || c.epochs < 2) return lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(c.epochs - 1);
  return lr * std::pow(c.lr_decay_to, t);
}

std::string format_csv_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunResult run_experiment(const RunConfig& c, const Datasets& ds, Method m, double lr,
                         const RunOutputs& out) {
  c.validate();
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  const auto start = std::chrono::steady_clock::now();

  RunResult res;
  res.method = m;
  res.lr = lr;
  res.csv_path = out.csv;

  Rng rng = make_rng(c.seed, kInitStream);
  nn::Network net(network_specs(c, m, ds.train.dim(), ds.train.num_classes), rng);
  nn::OptimizerConfig oc;
  oc.kind = c.optimizer;
  oc.momentum = c.momentum;
  oc.beta1 = c.beta1;
  oc.beta2 = c.beta2;
  oc.adam_eps = c.adam_eps;
  oc.weight_decay = c.weight_decay;
  nn::Optimizer opt(oc);
  nn::DivergenceGuard guard;
  guard.factor = c.divergence_factor;

  std::ofstream csv;
  if (!out.csv.empty()) {
    csv.open(out.csv, std::ios::trunc);
    if (!csv) throw Error("cannot write " + out.csv.string());
    csv << "epoch,train_loss,train_err,test_err,diverged\n";
    csv.flush();
  }

  for (std::size_t e = 0; e < c.epochs; ++e) {
    const nn::EpochStats st =
        nn::train_epoch(net, ds.train, c.batch_size, c.seed, e, opt, epoch_lr(c, lr, e), &guard);
    EpochRow row;
    row.epoch = e + 1;
    row.train_loss = st.mean_loss;
    row.train_err = st.error_rate;
    row.test_err = std::numeric_limits<double>::quiet_NaN();
    row.diverged = st.diverged;
    std::string reason = st.reason;
    if (!row.diverged) {
      row.diverged = numerically_failed(
          [&] { row.test_err = nn::evaluate(net, ds.test, c.batch_size).error_rate; }, reason);
    }
    res.rows.push_back(row);
    if (csv.is_open()) write_row(csv, row);
    if (row.diverged) {
      res.diverged = true;
      res.diverged_epoch = row.epoch;
      res.reason = reason;
      break;
    }
  }

  if (!res.diverged && !out.checkpoint.empty()) {
    save_checkpoint(out.checkpoint, net);
    res.checkpoint_path = out.checkpoint;
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

std::vector<MethodSummary> summarize(const std::vector<RunResult>& runs,
                                     const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    MethodSummary s;
    s.method = m;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const RunResult& r = runs[i];
      if (r.method != m) continue;
      if (r.diverged) {
        s.diverged_lrs.push_back(r.lr);
        continue;
      }
      if (!s.best || r.final_train_loss() < runs[*s.best].final_train_loss()) s.best = i;
    }
    out.push_back(std::move(s));
  }
  return out;
}

const RunResult* SweepResult::best_run(Method m) const {
  for (const MethodSummary& s : summary) {
    if (s.method == m) return s.best ? &runs[*s.best] : nullptr;
  }
  return nullptr;
}

SweepResult run_sweep(const RunConfig& c, const Datasets& ds,
                      const std::filesystem::path& out_dir, std::size_t jobs) {
  c.validate();
  struct Task {
    Method method;
    double lr;
  };
  // Surface configuration errors before any training starts.
  for (Method m : c.methods) {
    for (const nn::LayerSpec& spec :
         network_specs(c, m, ds.train.dim(), ds.train.num_classes)) {
      spec.validate();
    }
  }
  std::vector<Task> tasks;
  for (Method m : c.methods) {
    for (double lr : c.lr_grid) tasks.push_back({m, lr});
  }
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  SweepResult sweep;
  sweep.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        RunOutputs out;
        if (!out_dir.empty()) {
          const std::string stem = run_stem(tasks[i].method, tasks[i].lr);
          out.csv = out_dir / (stem + ".csv");
          if (c.save_checkpoint) out.checkpoint = out_dir / (stem + ".ckpt");
        }
        sweep.runs[i] = run_experiment(c, ds, tasks[i].method, tasks[i].lr, out);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  sweep.summary = summarize(sweep.runs, c.methods);
  if (!out_dir.empty()) {
    std::ofstream(out_dir / "summary.txt", std::ios::trunc) << summary_text(sweep);
    std::ofstream(out_dir / "config.txt", std::ios::trunc) << run_metadata(c);
  }
  return sweep;
}

std::string summary_text(const SweepResult& s) {
  std::ostringstream o;
  for (const MethodSummary& m : s.summary) {
    o << '[' << method_name(m.method) << "]\n";
    if (m.best) {
      const RunResult& r = s.runs[*m.best];
      const EpochRow& last = r.rows.back();
      o << "best_lr = " << format_real(r.lr) << '\n'
        << "final_train_loss = " << format_csv_real(last.train_loss) << '\n'
        << "final_train_err = " << format_csv_real(last.train_err) << '\n'
        << "final_test_err = " << format_csv_real(last.test_err) << '\n';
    } else {
      o << "best_lr = no stable lr\n";
    }
    o << "diverged_lrs =";
    for (std::size_t i = 0; i < m.diverged_lrs.size(); ++i) {
      o << (i == 0 ? " " : ", ") << format_real(m.diverged_lrs[i]);
    }
    o << "\n\n";
  }
  return o.str();
}

std::string run_metadata(const RunConfig& c) {
  std::string out;
  if (c.dataset == "mnist") out += "# features: MNIST pixels divided by 255, no centering\n";
  out += to_text(c);
  return out;
}

}  // namespace own::harness
