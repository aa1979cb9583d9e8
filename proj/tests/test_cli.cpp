// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "rui/cli.hpp"
#include "rui/synth.hpp"
#include "test_util.hpp"

namespace rui {
namespace {

namespace fs = std::filesystem;
using rui::testing::TempDir;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "rui");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A corpus, a small config and one trained checkpoint shared by every test.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const fs::path root = dir_->path();
    std::mt19937_64 rng(5);
    for (const char* sub : {"data/clean", "data/noise", "inputs"}) fs::create_directories(root / sub);
    for (int i = 0; i < 4; ++i)
      save_wav(synth::utterance_clip(synth::random_voice(rng), 24000, rng),
               root / "data/clean" / ("c" + std::to_string(i) + ".wav"));
    for (int i = 0; i < 2; ++i)
      save_wav(synth::noise_clip(synth::kNoiseKinds[i], 30000, rng), root / "data/noise" / ("n" + std::to_string(i) + ".wav"));
    auto noisy = mix_at_snr(synth::utterance_clip(synth::random_voice(rng), 20000, rng),
                            synth::noise_clip(synth::NoiseKind::kPink, 20000, rng), 5.0);
    save_wav(noisy.noisy, root / "inputs/a.wav");
    save_wav(noisy.clean, root / "inputs/b.wav");
    std::ofstream(root / "small.cfg") << "# tiny model for tests\n"
                                         "pem.crn_width = 2\npem.crn_hidden = 8\nmri.channels = 3\n"
                                         "mri.n_refinements = 3\nuie.pitch_bins = 16\n"
                                         "segment_samples = 16000\nprepare.target_seconds = 5\n"
                                         "epochs_max = 1\nbatch = 2\n";
    cfg_ = (root / "small.cfg").string();
    auto prep = run({"prepare", "--config", cfg_, "--in", (root / "data").string(), "--manifest",
                     (root / "m.csv").string()});
    ASSERT_EQ(prep.code, 0) << prep.err;
    auto tr = run({"train", "--config", cfg_, "--manifest", (root / "m.csv").string(), "--out",
                   (root / "model").string()});
    ASSERT_EQ(tr.code, 0) << tr.err;
    ckpt_ = (root / "model" / "best.ckpt").string();
  }
  static void TearDownTestSuite() { delete dir_; }

  static fs::path root() { return dir_->path(); }

  static TempDir* dir_;
  static std::string cfg_, ckpt_;
};

TempDir* CliPipeline::dir_ = nullptr;
std::string CliPipeline::cfg_, CliPipeline::ckpt_;

TEST_F(CliPipeline, PrepareAndTrainLeaveTheirArtifacts) {
  auto m = read_manifest(root() / "m.csv");
  EXPECT_EQ(m.rows.size(), 5u);
  EXPECT_TRUE(fs::exists(ckpt_));
  EXPECT_EQ(slurp(root() / "model" / "train_log.csv").rfind(kTrainLogHeader, 0), 0u);
}

TEST_F(CliPipeline, EnhanceKeepsDurationAndIsIdempotent) {
  const auto in = (root() / "inputs/a.wav").string();
  auto r1 = run({"enhance", "--checkpoint", ckpt_, "--in", in, "--out", (root() / "e1.wav").string()});
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_NE(r1.err.find("effective config"), std::string::npos);
  EXPECT_NE(r1.err.find("mri.n_refinements = 3"), std::string::npos);
  run({"enhance", "--checkpoint", ckpt_, "--in", in, "--out", (root() / "e2.wav").string()});
  EXPECT_EQ(load_wav(root() / "e1.wav").samples.size(), load_wav(in).samples.size());
  EXPECT_EQ(slurp(root() / "e1.wav"), slurp(root() / "e2.wav"));
}

TEST_F(CliPipeline, EnhanceDirectoryMirrorsBasenames) {
  auto r = run({"enhance", "--checkpoint", ckpt_, "--in", (root() / "inputs").string(), "--out",
                (root() / "enh").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root() / "enh/a.enh.wav"));
  EXPECT_TRUE(fs::exists(root() / "enh/b.enh.wav"));
}

TEST_F(CliPipeline, EvalWritesOneRowPerUtterance) {
  auto r = run({"eval", "--checkpoint", ckpt_, "--manifest", (root() / "m.csv").string(), "--out",
                (root() / "metrics.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  auto csv = slurp(root() / "metrics.csv");
  EXPECT_EQ(csv.rfind(kMetricsHeader, 0), 0u);
  const auto rows = read_manifest(root() / "m.csv").split(Split::kVal).size();
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), rows + 1);
  EXPECT_NE(r.err.find("PESQ n/a"), std::string::npos);
}

TEST_F(CliPipeline, VizEmitsOnePanelPerStage) {
  auto r = run({"viz", "--checkpoint", ckpt_, "--in", (root() / "inputs/a.wav").string(), "--out",
                (root() / "viz").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::size_t pgm = 0;
  for (const auto& e : fs::directory_iterator(root() / "viz")) pgm += e.path().extension() == ".pgm";
  EXPECT_EQ(pgm, 6u);
  for (auto name : {"noisy", "pem", "f1", "f2", "f3", "final"})
    EXPECT_TRUE(fs::exists(root() / "viz" / (std::string(name) + ".pgm"))) << name;
}

TEST_F(CliPipeline, AuditPassesBothIdentities) {
  auto r = run({"audit", "--checkpoint", ckpt_, "--in", (root() / "inputs/b.wav").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("S-path identity: PASS"), std::string::npos);
  EXPECT_NE(r.out.find("A-path identity: PASS"), std::string::npos);
}

TEST_F(CliPipeline, SeedFlagReachesTheEffectiveConfig) {
  auto r = run({"prepare", "--config", cfg_, "--seed", "77", "--in", (root() / "data").string(),
                "--manifest", (root() / "m77.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("seed = 77"), std::string::npos);
  EXPECT_NE(slurp(root() / "m77.csv"), slurp(root() / "m.csv"));
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  auto r = run({"enhance", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"train"}).code, 1);  // missing --manifest
}

TEST(Cli, RuntimeErrorsExitTwo) {
  TempDir dir("clierr");
  auto r = run({"prepare", "--in", dir.path().string(), "--manifest", (dir / "m.csv").string(), "--set", "foo=1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unknown config key 'foo'"), std::string::npos);
  r = run({"enhance", "--checkpoint", (dir / "none.ckpt").string(), "--in", "x.wav", "--out", "y.wav"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, ConfigFilesRejectUnknownKeys) {
  Config c;
  EXPECT_THROW(c.merge_text("lr0 = 0.01\nwarmup = 3\n"), ConfigError);
  c.merge_text("# comment only\n\n lr0 = 0.01 # trailing\n");
  EXPECT_EQ(c.real("lr0"), 0.01);
  EXPECT_THROW(c.merge_text("lr0\n"), ConfigError);
  c.set("batch", "x");
  EXPECT_THROW(c.count("batch"), ConfigError);
}

TEST(Cli, WorkerThreadsFromEnvironment) {
  ::unsetenv("RUI_THREADS");
  EXPECT_EQ(cli::worker_threads(), 1u);
  ::setenv("RUI_THREADS", "3", 1);
  EXPECT_EQ(cli::worker_threads(), 3u);
  ::setenv("RUI_THREADS", "zero", 1);
  EXPECT_THROW(cli::worker_threads(), ConfigError);
  ::unsetenv("RUI_THREADS");
}

}  // namespace
}  // namespace rui
