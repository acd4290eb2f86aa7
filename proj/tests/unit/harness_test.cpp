#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "own/errors.hpp"
#include "own/harness/checkpoint.hpp"
#include "own/harness/config.hpp"
#include "own/harness/experiment.hpp"
#include "own/harness/verify.hpp"

namespace own::harness {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("own_harness_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

// Small synthetic problem that trains in well under a second.
RunConfig tiny_config() {
  RunConfig c;
  c.dataset = "synthetic";
  c.synth_classes = 3;
  c.synth_dim = 6;
  c.synth_per_class = 40;
  c.synth_test_per_class = 10;
  c.depth = 2;
  c.width = 5;
  c.group_size = 2;
  c.batch_size = 16;
  c.epochs = 3;
  c.lr_grid = {0.1};
  c.seed = 9;
  return c;
}

// ---- config ----

TEST(Config, DefaultsDescribeTheMnistProtocol) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.depth, 4u);
  EXPECT_EQ(c.width, 100u);
  EXPECT_EQ(c.batch_size, 1024u);
  EXPECT_EQ(c.lr_grid, (std::vector<double>{0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1, 5}));
  EXPECT_EQ(c.optimizer, nn::OptimizerKind::sgd);
}

TEST(Config, ParsesCommentsListsAndBlankLines) {
  const RunConfig c = parse_config(
      "# comment line\n"
      "\n"
      "dataset = synthetic   # trailing comment\n"
      "method=plain, olm,cayt\n"
      "lr_grid=0.5,1\n"
      "epochs=2\n"
      "scale=true\n");
  EXPECT_EQ(c.dataset, "synthetic");
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::plain, Method::olm, Method::cayt}));
  EXPECT_EQ(c.lr_grid, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.epochs, 2u);
  EXPECT_TRUE(c.scale);
}

TEST(Config, UnknownKeyNamesTheLine) {
  try {
    parse_config("epochs=2\nlearning_rate=0.1\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos);
  }
}

TEST(Config, RejectsDuplicatesAndMalformedValues) {
  EXPECT_THROW(parse_config("epochs=2\nepochs=3\n"), ConfigError);
  EXPECT_THROW(parse_config("epochs=two\n"), ConfigError);
  EXPECT_THROW(parse_config("epochs=-1\n"), ConfigError);
  EXPECT_THROW(parse_config("scale=maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("just a line\n"), ConfigError);
  EXPECT_THROW(parse_config("method=olm,sgd\n"), ConfigError);
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  EXPECT_THROW(parse_config("epochs=0\n"), ConfigError);
  EXPECT_THROW(parse_config("lr_grid=0.1,-1\n"), ConfigError);
  EXPECT_THROW(parse_config("method=cayt\noptimizer=adam\n"), ConfigError);
  EXPECT_THROW(parse_config("dataset=cifar\n"), ConfigError);
  EXPECT_THROW(parse_config("lr_decay_to=0\n"), ConfigError);
}

TEST(Config, TextFormRoundTrips) {
  RunConfig c = tiny_config();
  c.methods = {Method::olm_var, Method::qr_proj, Method::wn};
  c.lr_grid = {0.0005, 0.1, 5};
  c.ridge = 1e-7;
  c.lr_decay_to = 0.01;
  c.dataset_dir = "/data/mnist";
  const std::string text = to_text(c);
  EXPECT_EQ(to_text(parse_config(text)), text);
}

TEST(Config, ShortestRealText) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(5.0), "5");
  EXPECT_EQ(format_real(0.0005), "0.0005");
  EXPECT_EQ(format_real(1e-300), "1e-300");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Config, MethodMapsToLayerKinds) {
  const RunConfig c;
  const auto olm = network_specs(c, Method::olm_var, 784, 10);
  ASSERT_EQ(olm.size(), 9u);  // 4 × (linear, relu) + output
  EXPECT_EQ(olm[0].kind, nn::LayerKind::olm_linear);
  EXPECT_EQ(olm[0].orth, olm::OrthKind::eigenbasis);
  EXPECT_EQ(olm[8].out_dim, 10u);
  const auto cay = network_specs(c, Method::cayt, 784, 10);
  EXPECT_EQ(cay[0].kind, nn::LayerKind::stiefel_linear);
  EXPECT_EQ(cay[0].manifold, stiefel::Method::cayley);
  EXPECT_EQ(network_specs(c, Method::plain, 784, 10)[0].kind, nn::LayerKind::linear);
  EXPECT_EQ(network_specs(c, Method::wn, 784, 10)[0].kind, nn::LayerKind::wn_linear);
}

// ---- experiment ----

TEST(Datasets, SyntheticSplitKeepsClassesBalanced) {
  const RunConfig c = tiny_config();
  const Datasets ds = load_datasets(c);
  EXPECT_EQ(ds.train.count(), 120u);
  EXPECT_EQ(ds.test.count(), 30u);
  std::vector<std::size_t> per(3, 0);
  for (auto l : ds.test.labels) ++per[l];
  EXPECT_EQ(per, (std::vector<std::size_t>{10, 10, 10}));
}

TEST(Datasets, LimitsAndValidationSplit) {
  RunConfig c = tiny_config();
  c.train_limit = 50;
  c.test_limit = 7;
  Datasets ds = load_datasets(c);
  EXPECT_EQ(ds.train.count(), 50u);
  EXPECT_EQ(ds.test.count(), 7u);
  c.validation_fraction = 0.2;
  ds = load_datasets(c);
  EXPECT_EQ(ds.train.count(), 40u);
  EXPECT_EQ(ds.test.count(), 10u);
}

TEST(Schedule, ConstantUnlessDecayRequested) {
  RunConfig c;
  c.epochs = 5;
  EXPECT_EQ(epoch_lr(c, 0.3, 4), 0.3);
  c.lr_decay_to = 0.01;
  EXPECT_EQ(epoch_lr(c, 0.3, 0), 0.3);
  EXPECT_NEAR(epoch_lr(c, 0.3, 4), 0.003, 1e-15);
  EXPECT_NEAR(epoch_lr(c, 0.3, 2), 0.03, 1e-15);
}

TEST(CsvReal, SeventeenDigitsAndNonFinite) {
  EXPECT_EQ(format_csv_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_csv_real(NAN), "nan");
  EXPECT_EQ(format_csv_real(-INFINITY), "-inf");
  EXPECT_EQ(format_csv_real(0.0), "0");
}

TEST_F(TempDir, PlainOneEpochWritesOneRow) {
  RunConfig c = tiny_config();
  c.epochs = 1;
  const Datasets ds = load_datasets(c);
  const RunResult r = run_experiment(c, ds, Method::plain, 0.1, {dir_ / "a.csv", {}});
  EXPECT_FALSE(r.diverged);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.final_train_loss()));
  const auto lines = lines_of(slurp(dir_ / "a.csv"));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], "epoch,train_loss,train_err,test_err,diverged");
  EXPECT_EQ(lines[1].substr(0, 2), "1,");
  EXPECT_EQ(lines[1].back(), '0');
}

TEST_F(TempDir, RepeatedRunsEmitIdenticalBytes) {
  const RunConfig c = tiny_config();
  const Datasets ds = load_datasets(c);
  for (Method m : {Method::olm, Method::ci_qr}) {
    run_experiment(c, ds, m, 0.1, {dir_ / "a.csv", dir_ / "a.ckpt"});
    run_experiment(c, ds, m, 0.1, {dir_ / "b.csv", dir_ / "b.ckpt"});
    EXPECT_EQ(slurp(dir_ / "a.csv"), slurp(dir_ / "b.csv"));
    EXPECT_EQ(slurp(dir_ / "a.ckpt"), slurp(dir_ / "b.ckpt"));
  }
}

TEST_F(TempDir, DivergenceIsRecordedNotThrown) {
  RunConfig c = tiny_config();
  c.epochs = 5;
  const Datasets ds = load_datasets(c);
  const RunResult r = run_experiment(c, ds, Method::plain, 1e4, {dir_ / "d.csv", dir_ / "d.ckpt"});
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.reason.empty());
  EXPECT_EQ(r.rows.size(), r.diverged_epoch);
  EXPECT_TRUE(r.checkpoint_path.empty());
  EXPECT_FALSE(fs::exists(dir_ / "d.ckpt"));
  const auto lines = lines_of(slurp(dir_ / "d.csv"));
  ASSERT_EQ(lines.size(), r.rows.size() + 1);
  EXPECT_EQ(lines.back().substr(lines.back().size() - 6), ",nan,1");
}

TEST_F(TempDir, TrainingReducesLossOnSeparableData) {
  RunConfig c = tiny_config();
  c.epochs = 10;
  const Datasets ds = load_datasets(c);
  for (Method m : {Method::plain, Method::olm, Method::cayt}) {
    const RunResult r = run_experiment(c, ds, m, 0.1);
    ASSERT_FALSE(r.diverged) << method_name(m);
    EXPECT_LT(r.rows.back().train_loss, r.rows.front().train_loss) << method_name(m);
  }
}

RunResult fake_run(Method m, double lr, double final_loss, bool diverged) {
  RunResult r;
  r.method = m;
  r.lr = lr;
  r.diverged = diverged;
  EpochRow row;
  row.epoch = 1;
  row.train_loss = final_loss;
  row.diverged = diverged;
  r.rows.push_back(row);
  return r;
}

TEST(Summary, LowestStableFinalLossWinsWithEarlierTies) {
  const std::vector<RunResult> runs = {
      fake_run(Method::olm, 0.1, 0.5, false), fake_run(Method::olm, 0.5, 0.2, false),
      fake_run(Method::olm, 1.0, 0.2, false), fake_run(Method::olm, 5.0, 0.01, true)};
  const auto s = summarize(runs, {Method::olm});
  ASSERT_EQ(s.size(), 1u);
  ASSERT_TRUE(s[0].best);
  EXPECT_EQ(*s[0].best, 1u);
  EXPECT_EQ(s[0].diverged_lrs, (std::vector<double>{5.0}));
}

TEST(Summary, SingleRunIsSelected) {
  const auto s = summarize({fake_run(Method::plain, 0.1, 2.0, false)}, {Method::plain});
  ASSERT_TRUE(s[0].best);
  EXPECT_EQ(*s[0].best, 0u);
}

TEST(Summary, AllDivergedMeansNoStableLr) {
  SweepResult sw;
  sw.runs = {fake_run(Method::cayt, 0.5, NAN, true), fake_run(Method::cayt, 5, NAN, true)};
  sw.summary = summarize(sw.runs, {Method::cayt});
  EXPECT_FALSE(sw.summary[0].best);
  EXPECT_EQ(sw.best_run(Method::cayt), nullptr);
  const std::string text = summary_text(sw);
  EXPECT_NE(text.find("[cayt]"), std::string::npos);
  EXPECT_NE(text.find("best_lr = no stable lr"), std::string::npos);
  EXPECT_NE(text.find("diverged_lrs = 0.5, 5"), std::string::npos);
}

TEST_F(TempDir, SweepIsIndependentOfJobCount) {
  RunConfig c = tiny_config();
  c.methods = {Method::plain, Method::olm};
  c.lr_grid = {0.05, 0.2};
  const Datasets ds = load_datasets(c);
  const SweepResult one = run_sweep(c, ds, dir_ / "one", 1);
  const SweepResult three = run_sweep(c, ds, dir_ / "three", 3);
  ASSERT_EQ(one.runs.size(), 4u);
  for (const std::string name :
       {"run_plain_lr0.05.csv", "run_olm_lr0.2.csv", "summary.txt", "config.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "one" / name)) << name;
    EXPECT_EQ(slurp(dir_ / "one" / name), slurp(dir_ / "three" / name)) << name;
  }
  EXPECT_TRUE(fs::exists(dir_ / "one" / "run_olm_lr0.05.ckpt"));
  EXPECT_EQ(parse_config(slurp(dir_ / "one" / "config.txt")).methods, c.methods);
  ASSERT_NE(one.best_run(Method::olm), nullptr);
}

TEST(Sweep, ConfigErrorsSurfaceBeforeTraining) {
  RunConfig c = tiny_config();
  c.group_size = 50;  // resolves to the full width of 5, equal to the hidden input
  const Datasets ds = load_datasets(c);
  EXPECT_THROW(run_sweep(c, ds, {}, 1), ConfigError);
}

// ---- checkpoint ----

nn::Network every_kind_network() {
  Rng rng = make_rng(5);
  std::vector<nn::LayerSpec> specs;
  auto add = [&](nn::LayerKind k, std::size_t in, std::size_t out) {
    nn::LayerSpec s;
    s.kind = k;
    s.in_dim = in;
    s.out_dim = out;
    specs.push_back(s);
    return &specs.back();
  };
  add(nn::LayerKind::linear, 7, 6);
  add(nn::LayerKind::batchnorm, 6, 6)->bn_eps = 1e-3;
  add(nn::LayerKind::relu, 6, 6);
  add(nn::LayerKind::wn_linear, 6, 6);
  nn::LayerSpec* o = add(nn::LayerKind::olm_linear, 6, 5);
  o->group_size = 2;
  o->scale = true;
  o->orth = olm::OrthKind::eigenbasis;
  o->ridge = olm::Ridge::absolute(1e-9);
  o->decay_proxy = true;
  nn::LayerSpec* st = add(nn::LayerKind::stiefel_linear, 5, 4);
  st->group_size = 3;
  st->manifold = stiefel::Method::cayley;
  add(nn::LayerKind::olm_linear, 4, 3);
  nn::Network net(specs, rng);
  // Move batchnorm statistics away from their initial values.
  net.forward(gaussian_matrix(7, 9, rng), true);
  return net;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  nn::Network net = every_kind_network();
  const auto bytes = checkpoint_bytes(net);
  ASSERT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "OLM1");
  nn::Network back = parse_checkpoint(bytes);
  EXPECT_EQ(checkpoint_bytes(back), bytes);
  const auto a = net.specs();
  const auto b = back.specs();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].kind, b[i].kind);
    EXPECT_EQ(a[i].groups_of(), b[i].groups_of());
    EXPECT_EQ(a[i].scale, b[i].scale);
    EXPECT_EQ(a[i].orth, b[i].orth);
    EXPECT_EQ(a[i].manifold, b[i].manifold);
    EXPECT_EQ(a[i].decay_proxy, b[i].decay_proxy);
    EXPECT_EQ(a[i].ridge.coefficient, b[i].ridge.coefficient);
    EXPECT_EQ(a[i].ridge.relative, b[i].ridge.relative);
    EXPECT_EQ(a[i].bn_eps, b[i].bn_eps);
  }
  Rng rng = make_rng(6);
  const Matrix x = gaussian_matrix(7, 4, rng);
  EXPECT_EQ(net.forward(x, false), back.forward(x, false));
}

TEST(Checkpoint, EveryTruncationIsALengthError) {
  nn::Network net = every_kind_network();
  const auto bytes = checkpoint_bytes(net);
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_THROW(parse_checkpoint(std::span(bytes.data(), n)), LengthError) << n;
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(parse_checkpoint(longer), LengthError);
}

TEST(Checkpoint, BadMagicAndKindAreFormatErrors) {
  nn::Network net = every_kind_network();
  auto bytes = checkpoint_bytes(net);
  auto bad = bytes;
  bad[3] = '2';
  EXPECT_THROW(parse_checkpoint(bad), FormatError);
  bad = bytes;
  bad[8] = 99;  // first layer kind
  EXPECT_THROW(parse_checkpoint(bad), FormatError);
}

TEST_F(TempDir, FileRoundTrip) {
  nn::Network net = every_kind_network();
  save_checkpoint(dir_ / "n.ckpt", net);
  nn::Network back = load_checkpoint(dir_ / "n.ckpt");
  EXPECT_EQ(checkpoint_bytes(back), checkpoint_bytes(net));
  EXPECT_THROW(load_checkpoint(dir_ / "missing.ckpt"), Error);
}

TEST(Export, ReparameterizedLayersBecomePlainAndMatchBitExactly) {
  nn::Network net = every_kind_network();
  nn::Network out = export_inference(net);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const nn::LayerKind k = out.layer(i).spec().kind;
    EXPECT_TRUE(k == nn::LayerKind::linear || k == nn::LayerKind::relu ||
                k == nn::LayerKind::batchnorm);
  }
  EXPECT_TRUE(out.layer(4).spec().scale);
  Rng rng = make_rng(8);
  for (int b = 0; b < 10; ++b) {
    const Matrix x = gaussian_matrix(7, 1 + b, rng);
    EXPECT_EQ(net.forward(x, false), out.forward(x, false));
  }
  // The exported network survives its own checkpoint round trip.
  nn::Network back = parse_checkpoint(checkpoint_bytes(out));
  const Matrix x = gaussian_matrix(7, 3, rng);
  EXPECT_EQ(back.forward(x, false), out.forward(x, false));
}

// ---- verify ----

TEST(Verify, NamesRoundTrip) {
  for (Suite s : all_suites()) EXPECT_EQ(parse_suite(suite_name(s)), s);
  EXPECT_THROW(parse_suite("everything"), ConfigError);
}

TEST(Verify, EverySuitePasses) {
  for (Suite s : all_suites()) {
    const SuiteReport r = run_suite(s, 1);
    EXPECT_TRUE(r.passed()) << format_report(r);
    for (const CheckResult& c : r.checks) EXPECT_GT(c.instances, 0u) << c.name;
  }
}

TEST(Verify, ReportListsFailingSeeds) {
  SuiteReport r;
  r.suite = Suite::manifold;
  CheckResult c;
  c.name = "example";
  c.instances = 3;
  c.failing_seeds = {17, 42};
  r.checks.push_back(c);
  EXPECT_FALSE(r.passed());
  const std::string text = format_report(r);
  EXPECT_NE(text.find("suite manifold: FAIL"), std::string::npos);
  EXPECT_NE(text.find("failing seeds: 17 42"), std::string::npos);
}

}  // namespace
}  // namespace own::harness
