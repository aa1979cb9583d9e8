// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "rui/synth.hpp"
#include "rui/trainer.hpp"
#include "test_util.hpp"

namespace rui {
namespace {

using rui::testing::TempDir;

std::vector<double> lr_trace(const std::vector<double>& losses) {
  TrainConfig cfg;
  auto s = initial_schedule(cfg);
  std::vector<double> out;
  for (double l : losses) {
    s = lr_step(s, l, cfg);
    out.push_back(s.lr);
  }
  return out;
}

TEST(Schedule, ImprovingLossesKeepTheRate) {
  for (double lr : lr_trace({1.0, 0.9, 0.8})) EXPECT_EQ(lr, 0.001);
}

TEST(Schedule, ThreeStagnantEpochsDecayOnce) {
  auto t = lr_trace({1.0, 1.1, 1.2, 1.3});
  EXPECT_EQ(t[0], 0.001);
  EXPECT_EQ(t[1], 0.001);
  EXPECT_EQ(t[2], 0.001);
  EXPECT_DOUBLE_EQ(t[3], 0.00075);
}

TEST(Schedule, TwoCyclesGiveTheSquare) {
  auto t = lr_trace({1.0, 1.1, 1.2, 1.3, 1.0, 1.5, 1.4});
  EXPECT_DOUBLE_EQ(t.back(), 0.0005625);
  EXPECT_DOUBLE_EQ(t.back(), 0.001 * 0.75 * 0.75);
}

TEST(Schedule, LrFormulaHoldsForAnySequence) {
  TrainConfig cfg;
  auto s = initial_schedule(cfg);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    s = lr_step(s, u(rng), cfg);
    EXPECT_LE(s.stagnant, cfg.patience);
    EXPECT_DOUBLE_EQ(s.lr, cfg.lr0 * std::pow(cfg.decay, static_cast<double>(s.decays)));
  }
  EXPECT_THROW(lr_step(s, std::nan(""), cfg), NonFiniteError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.decay = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.patience = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr0 = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  Config cfg;
  cfg.set_override("lr0 = 0.002");
  EXPECT_EQ(TrainConfig::from(cfg).lr0, 0.002);
  EXPECT_THROW(cfg.set_override("learning_rate=1"), ConfigError);
}

TEST(Adam, FirstStepMovesByTheLearningRate) {
  compute::ParamStore<double> s;
  auto w = s.add("w", {3}, compute::Init::kZeros);
  w.mutable_value() = {1.0, -2.0, 0.5};
  compute::backward(compute::sum(compute::mul(w, compute::Tensor<double>::constant({3}, {4.0, -0.5, 0.0}))));
  Adam<double> adam(s);
  adam.step(0.01);
  // Bias-corrected first step: lr g / (|g| + eps).
  EXPECT_NEAR(w.value()[0], 1.0 - 0.01 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w.value()[1], -2.0 + 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(w.value()[2], 0.5);
}

TEST(ClipGradNorm, ScalesToTheBound) {
  compute::ParamStore<double> s;
  auto w = s.add("w", {2}, compute::Init::kZeros);
  compute::backward(compute::sum(compute::mul(w, compute::Tensor<double>::constant({2}, {3.0, 4.0}))));
  EXPECT_DOUBLE_EQ(clip_grad_norm(s, 1.0), 5.0);
  EXPECT_NEAR(w.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(w.grad()[1], 0.8, 1e-15);
}

ModelConfig tiny_model(std::size_t n) {
  ModelConfig m;
  m.pem.crn_width = 2;
  m.pem.crn_hidden = 8;
  m.channels = 3;
  m.uie.pitch_bins = 16;
  m.n_refinements = n;
  return m;
}

std::vector<Example<float>> examples(std::size_t count, std::uint64_t seed) {
  std::vector<Example<float>> out;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    auto clean = synth::utterance_clip(synth::random_voice(rng), 8000, rng);
    auto noise = synth::noise_clip(synth::kNoiseKinds[i % 6], 8000, rng);
    auto mix = mix_at_snr(clean, noise, 5.0);
    out.push_back(make_example<float>(mix.noisy, mix.clean, make_stft_config()));
  }
  return out;
}

std::vector<std::string> log_without_wall_time(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line.substr(0, line.rfind(',')));
  return out;
}

TEST(Train, SeededRunsProduceIdenticalLogs) {
  TempDir dir("train");
  auto tr = examples(5, 1), va = examples(2, 2);
  TrainConfig cfg;
  cfg.model = tiny_model(1);
  cfg.epochs_max = 3;
  cfg.batch = 2;
  std::vector<std::vector<std::string>> logs;
  for (const char* run : {"a", "b"}) {
    RuiModel<float> m(cfg.model);
    m.initialize(cfg.seed);
    TrainOptions opt;
    opt.out_dir = dir / run;
    auto res = train(m, cfg, tr, va, opt);
    EXPECT_EQ(res.epochs.size(), 3u);
    EXPECT_TRUE(std::filesystem::exists(res.checkpoint));
    logs.push_back(log_without_wall_time(res.log_path));
  }
  ASSERT_EQ(logs[0].size(), 4u);
  EXPECT_EQ(logs[0][0], "epoch,train_loss,val_loss,lr");
  EXPECT_EQ(logs[0], logs[1]);
}

TEST(Train, CheckpointRoundTripIsBitExact) {
  TempDir dir("ckpt");
  auto tr = examples(3, 3), va = examples(1, 4);
  TrainConfig cfg;
  cfg.model = tiny_model(2);
  cfg.epochs_max = 2;
  RuiModel<float> m(cfg.model);
  m.initialize(9);
  TrainOptions opt;
  opt.out_dir = dir.path();
  opt.config_snapshot = {{"mri.n_refinements", "2"}};
  auto res = train(m, cfg, tr, va, opt);
  // Reload the best checkpoint into two fresh models and compare forwards.
  RuiModel<float> a(cfg.model), b(cfg.model);
  auto header = compute::load_checkpoint(res.checkpoint, a.params());
  EXPECT_EQ(header.at("mri.n_refinements"), "2");
  compute::save_checkpoint(dir / "copy.ckpt", a.params(), header);
  compute::load_checkpoint(dir / "copy.ckpt", b.params());
  auto ya = a.forward(va[0].x).output().value(), yb = b.forward(va[0].x).output().value();
  ASSERT_EQ(ya.size(), yb.size());
  EXPECT_EQ(std::memcmp(ya.data(), yb.data(), ya.size() * sizeof(float)), 0);
  RuiModel<float> wrong(tiny_model(1));
  EXPECT_ANY_THROW(compute::load_checkpoint(res.checkpoint, wrong.params()));
}

TEST(Train, StepZeroMatchesPemOnly) {
  auto ex = examples(2, 5);
  RuiModel<float> rui(tiny_model(3)), pem(tiny_model(0));
  rui.initialize(11);
  pem.initialize(11);
  for (const auto& e : ex) {
    auto a = example_loss(rui, e, LossWeights{}, 24).total.item();
    auto b = example_loss(pem, e, LossWeights{}, 24).total.item();
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

TEST(Train, LossCoversTheFramedSpan) {
  auto cfg = make_stft_config();
  EXPECT_EQ(covered_length(16000, cfg), 40u * 384 + 512);
  auto ex = examples(1, 6);
  EXPECT_EQ(ex[0].ref_wave.numel(), covered_length(8000, cfg));
  EXPECT_EQ(ex[0].x.dim(0), cfg.frames_for(8000));
}

TEST(Train, EmptySplitsAreRejected) {
  TempDir dir("empty");
  TrainConfig cfg;
  cfg.model = tiny_model(0);
  RuiModel<float> m(cfg.model);
  TrainOptions opt;
  opt.out_dir = dir.path();
  EXPECT_THROW(train<float>(m, cfg, {}, examples(1, 1), opt), InventoryError);
  EXPECT_THROW(train<float>(m, cfg, examples(1, 1), {}, opt), InventoryError);
}

}  // namespace
}  // namespace rui
