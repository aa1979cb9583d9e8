// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rui/compute/grad_check.hpp"
#include "rui/evaluate.hpp"
#include "rui/spectral.hpp"
#include "rui/synth.hpp"
#include "test_util.hpp"

namespace rui {
namespace {

using compute::Tensor;
using rui::testing::random_tensor;
using rui::testing::TempDir;
using TD = Tensor<double>;

double sdr(std::vector<double> r, std::vector<double> e) {
  return si_sdr(std::span<const double>(r), std::span<const double>(e));
}

TEST(SiSdr, HandComputedZeroDecibelCase) {
  // a = 0.5, target = [0.5, 0.5], e = [0.5, -0.5]: equal energies.
  EXPECT_NEAR(sdr({1, 1}, {1, 0}), 10 * std::log10(0.5 / (0.5 + 1e-12)), 1e-12);
  EXPECT_NEAR(sdr({1, 1}, {1, 0}), 0.0, 1e-9);
}

TEST(SiSdr, ScaledCopyHitsTheCap) {
  auto r = rui::testing::uniform(1000, 1);
  std::vector<double> e(r);
  for (auto& v : e) v *= 3.7;
  EXPECT_EQ(sdr(r, e), 60.0);
}

TEST(SiSdr, InvariantToEstimateScale) {
  auto r = rui::testing::uniform(2000, 2), n = rui::testing::uniform(2000, 3);
  std::vector<double> e(2000);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = r[i] + 0.3 * n[i];
  const double base = sdr(r, e);
  for (double c : {0.01, 0.5, 2.0, 1000.0}) {
    std::vector<double> s(e);
    for (auto& v : s) v *= c;
    EXPECT_NEAR(sdr(r, s), base, 1e-9) << c;
  }
}

TEST(SiSdr, Errors) {
  EXPECT_THROW(sdr({0, 0, 0}, {1, 2, 3}), ReferenceError);
  EXPECT_THROW(sdr({1, 2}, {1, 2, 3}), ShapeError);
}

TEST(SiSnrLoss, MatchesMetricAndIsStronglyNegativeNearReference) {
  auto r = rui::testing::uniform(1024, 4), n = rui::testing::uniform(1024, 5);
  std::vector<double> e(1024);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = r[i] + 1e-4 * n[i];
  auto loss = si_snr_loss(TD::constant({1024}, r), TD::constant({1024}, e));
  EXPECT_LT(loss.item(), -40.0);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = r[i] + 0.5 * n[i];
  EXPECT_NEAR(si_snr_loss(TD::constant({1024}, r), TD::constant({1024}, e)).item(), -sdr(r, e), 1e-6);
}

TEST(SiSnrLoss, GradientFiniteAtExactMatch) {
  auto r = TD::constant({256}, rui::testing::uniform(256, 6));
  auto est = TD::leaf({256}, r.value(), true);
  compute::backward(si_snr_loss(r, est));
  for (double g : est.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(SiSnrLoss, PassesGradCheck) {
  compute::ParamStore<double> s;
  auto r = TD::constant({1024}, rui::testing::uniform(1024, 7));
  auto est = s.adopt("est", random_tensor({1024}, 8));
  compute::GradCheckOptions opt;
  opt.tol = 1e-4;
  auto report = compute::grad_check([&] { return si_snr_loss(r, est); }, s, opt);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(BarkFilterbank, UnitPeakTrianglesCoverTheBand) {
  auto w = bark_filterbank(24, 257, 16000);
  for (std::size_t b = 0; b < 24; ++b) {
    double peak = 0;
    for (std::size_t f = 0; f < 257; ++f) {
      EXPECT_GE(w[b * 257 + f], 0.0);
      peak = std::max(peak, w[b * 257 + f]);
    }
    EXPECT_GT(peak, 0.5);
    EXPECT_LE(peak, 1.0);
  }
  EXPECT_NEAR(hz_to_bark(1000.0), 13 * std::atan(0.76) + 3.5 * std::atan(std::pow(1000 / 7500.0, 2)), 1e-12);
  EXPECT_THROW(bark_filterbank(0, 257, 16000), ConfigError);
}

TEST(PerceptualLoss, ZeroForIdenticalSpectra) {
  auto s = random_tensor({8, 514}, 9, false);
  EXPECT_EQ(perceptual_loss(s, s).item(), 0.0);
}

TEST(PerceptualLoss, TenfoldBandPowerContributesUnitDistortion) {
  auto ref = random_tensor({3, 24}, 10, false, 0.5, 2.0);
  auto v = ref.value();
  v[1 * 24 + 7] *= 10.0;
  auto d = band_distortion(ref, TD::constant({3, 24}, v));
  for (std::size_t i = 0; i < 72; ++i) EXPECT_NEAR(d.value()[i], i == 31 ? 1.0 : 0.0, 1e-9);
}

TEST(PerceptualLoss, GrowsWithAddedNoise) {
  auto ref = random_tensor({10, 514}, 11, false);
  auto noise = rui::testing::uniform(10 * 514, 12);
  double prev = -1.0;
  for (double g : {0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
    auto v = ref.value();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += g * noise[i];
    const double l = perceptual_loss(ref, TD::constant(ref.shape(), v)).item();
    EXPECT_GT(l, prev) << g;
    EXPECT_GE(l, 0.0);
    prev = l;
  }
}

TEST(PerceptualLoss, PassesGradCheck) {
  compute::ParamStore<double> s;
  auto ref = random_tensor({4, 514}, 13, false);
  auto est = s.adopt("est", random_tensor({4, 514}, 14));
  compute::GradCheckOptions opt;
  opt.tol = 1e-4;
  auto report = compute::grad_check([&] { return perceptual_loss(ref, est); }, s, opt);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(CombinedLoss, BreakdownArithmeticIsExact) {
  auto rw = TD::constant({512}, rui::testing::uniform(512, 15));
  auto ew = TD::constant({512}, rui::testing::uniform(512, 16));
  auto rs = random_tensor({3, 514}, 17, false), es = random_tensor({3, 514}, 18, false);
  LossWeights w;
  EXPECT_EQ(w.si_snr, 1.0);
  EXPECT_EQ(w.perceptual, 0.2);
  auto b = combined_loss(rw, ew, rs, es, w);
  EXPECT_EQ(b.total.item(), 1.0 * b.si_snr_term + 0.2 * b.perceptual_term);
}

std::uint64_t splitmix_state = 0;
double splitmix_unit() {
  std::uint64_t z = (splitmix_state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1p-53;
}

AudioClip probe_signal() {
  AudioClip x;
  for (int i = 0; i < 48000; ++i) {
    const double t = i / 16000.0, w = 2 * std::numbers::pi * t;
    const double env = 0.5 + 0.5 * std::sin(w * 3);
    double v = 0.3 * env * (std::sin(w * 220) + 0.5 * std::sin(w * 440) + 0.25 * std::sin(w * 1320));
    if (t > 0.5 && t < 1.0) v *= 0.001;
    x.samples.push_back(static_cast<float>(v));
  }
  return x;
}

TEST(Stoi, MatchesReferenceImplementation) {
  // Reference values from pystoi 0.4.1 on the same float32 signals.
  auto x = probe_signal();
  splitmix_state = 7;
  std::vector<double> u(48000);
  for (auto& v : u) v = splitmix_unit();
  AudioClip y1 = x, y2 = x;
  for (std::size_t i = 0; i < 48000; ++i) {
    y1.samples[i] = static_cast<float>(static_cast<double>(x.samples[i]) + 0.1 * (u[i] - 0.5));
    y2.samples[i] = static_cast<float>(static_cast<double>(x.samples[i]) + 0.4 * (u[i] - 0.5));
  }
  EXPECT_NEAR(stoi(x, y1), 0.7058798494961039, 1e-6);
  EXPECT_NEAR(stoi(x, y2), 0.6408198260248642, 1e-6);
  EXPECT_NEAR(stoi(x, x), 1.0, 1e-9);
}

TEST(Stoi, ResamplerKeepsLowFrequencySine) {
  std::vector<double> x(16000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2 * std::numbers::pi * 500.0 * i / 16000.0);
  auto y = resample_16k_to_10k(x);
  ASSERT_EQ(y.size(), 10000u);
  for (std::size_t i = 1000; i < 9000; ++i)
    EXPECT_NEAR(y[i], std::sin(2 * std::numbers::pi * 500.0 * i / 10000.0), 1e-3);
}

AudioClip speech(std::uint64_t seed, std::size_t n = 48000) {
  std::mt19937_64 rng(seed);
  return synth::utterance_clip(synth::random_voice(rng), n, rng);
}

TEST(Stoi, SelfScoreScaleInvarianceAndSnrSweep) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto s = speech(seed);
    EXPECT_GE(stoi(s, s), 0.999);
    AudioClip half = s;
    for (auto& v : half.samples) v *= 0.5f;
    std::mt19937_64 rng(seed + 100);
    auto n = synth::noise_clip(synth::NoiseKind::kWhite, s.samples.size(), rng);
    auto noisy = mix_at_snr(s, n, 5.0).noisy;
    AudioClip quiet = noisy;
    for (auto& v : quiet.samples) v *= 0.25f;
    EXPECT_NEAR(stoi(s, quiet), stoi(s, noisy), 1e-6);
    double prev = 2.0;
    for (double snr : {20.0, 10.0, 0.0, -5.0}) {
      // Unscaled mixture so the reference stays the same clip.
      const double g = std::sqrt(energy(s.samples) / (energy(n.samples) * std::pow(10.0, snr / 10)));
      AudioClip y = s;
      for (std::size_t i = 0; i < y.samples.size(); ++i) y.samples[i] += static_cast<float>(g * n.samples[i]);
      const double v = stoi(s, y);
      EXPECT_LT(v, prev) << "seed " << seed << " snr " << snr;
      prev = v;
    }
  }
}

TEST(Stoi, TooShortAfterSilenceRemoval) {
  AudioClip s = speech(1, 4000);
  EXPECT_THROW(stoi(s, s), LengthError);
  EXPECT_THROW(stoi(s, speech(1, 3999)), ShapeError);
  // A long clip that is silent apart from a short burst keeps too few frames.
  AudioClip burst;
  burst.samples.assign(48000, 0.0f);
  auto b = rui::testing::noise_clip(2000, 3, 0.5);
  std::copy(b.samples.begin(), b.samples.end(), burst.samples.begin() + 20000);
  EXPECT_THROW(stoi(burst, burst), LengthError);
}

// Two clean and one noise file, a test-only manifest and a source over it.
struct EvalFixture {
  TempDir dir{"eval"};
  Manifest manifest;
  EvalFixture() {
    std::filesystem::create_directories(dir / "clean");
    std::filesystem::create_directories(dir / "noise");
    for (std::uint64_t s = 1; s <= 2; ++s) save_wav(speech(s, 40000), dir / "clean" / ("c" + std::to_string(s) + ".wav"));
    std::mt19937_64 rng(9);
    save_wav(synth::noise_clip(synth::NoiseKind::kPink, 40000, rng), dir / "noise" / "n.wav");
    ManifestOptions opt;
    opt.test_only = true;
    opt.snr_hi = 30;
    opt.segment_samples = 32000;
    opt.target_seconds = 6.0;
    build_manifest(dir / "clean", dir / "noise", dir / "m.csv", opt);
    manifest = read_manifest(dir / "m.csv");
  }
};

TEST(Evaluate, IdentityAndOracleEnhancers) {
  EvalFixture fx;
  MixtureSource src(32000);
  auto rows = fx.manifest.split(Split::kTest);
  ASSERT_EQ(rows.size(), 3u);
  auto same = evaluate(fx.manifest, rows, src, [](const Mixture& m) { return m.noisy; });
  ASSERT_EQ(same.rows.size(), rows.size());
  for (const auto& u : same.rows) {
    EXPECT_NEAR(u.si_sdr_enh, u.si_sdr_noisy, 1e-9);
    EXPECT_NEAR(u.stoi_enh, u.stoi_noisy, 1e-9);
  }
  EXPECT_NEAR(same.mean_improvement(), 0.0, 1e-9);
  auto oracle = evaluate(fx.manifest, rows, src, [](const Mixture& m) { return m.clean; });
  EXPECT_EQ(oracle.mean_si_sdr_enh, 60.0);
  for (const auto& u : oracle.rows) EXPECT_GE(u.stoi_enh, 0.999);
  auto csv = metrics_csv(oracle);
  EXPECT_EQ(csv.rfind(kMetricsHeader, 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(oracle.rows[2].utt_id, "test_00002");
}

TEST(Evaluate, RejectsLengthChangesAndMissingFiles) {
  EvalFixture fx;
  MixtureSource src(32000);
  auto rows = fx.manifest.split(Split::kTest);
  EXPECT_THROW(evaluate(fx.manifest, rows, src,
                        [](const Mixture& m) {
                          AudioClip c = m.noisy;
                          c.samples.pop_back();
                          return c;
                        }),
               ShapeError);
  std::filesystem::remove(fx.dir / "noise" / "n.wav");
  EXPECT_THROW(evaluate(fx.manifest, rows, src, [](const Mixture& m) { return m.noisy; }), InventoryError);
}

}  // namespace
}  // namespace rui
