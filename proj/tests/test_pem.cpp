// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "rui/compute/grad_check.hpp"
#include "rui/pem.hpp"
#include "test_util.hpp"

namespace rui {
namespace {

using compute::ParamStore;
using compute::Tensor;
using rui::testing::random_tensor;
using TD = Tensor<double>;

PemConfig config(PemKind kind) {
  PemConfig c;
  c.kind = kind;
  return c;
}

// Spectrum-scaled input: magnitudes span a few decades like real STFT frames.
TD spectrum(std::size_t frames, std::uint64_t seed) {
  return random_tensor({frames, 514}, seed, false, -20.0, 20.0);
}

std::size_t gru_count(std::size_t in, std::size_t h) { return 3 * h * (in + h) + 6 * h; }
std::size_t conv_count(std::size_t cin, std::size_t cout, std::size_t kt, std::size_t kf) {
  return cout * cin * kt * kf + cout;
}

TEST(PemParams, MaskCountFromLayerArithmetic) {
  ParamStore<double> s;
  MaskPem<double> pem(s, config(PemKind::kMask));
  const std::size_t expect =
      2 * 257 + gru_count(257, 128) + gru_count(128, 128) + (128 * 257 + 257);
  EXPECT_EQ(s.parameter_count(), expect);
  EXPECT_EQ(s.parameter_count(), 281347u);
}

TEST(PemParams, CrnCountFromLayerArithmetic) {
  ParamStore<double> s;
  CrnPem<double> pem(s, config(PemKind::kCrn));
  const std::size_t enc = conv_count(2, 8, 3, 5) + 2 * 8 * 129 + conv_count(8, 16, 3, 5) +
                          2 * 16 * 65 + conv_count(16, 32, 3, 5) + 2 * 32 * 33;
  const std::size_t flat = 32 * 33;
  const std::size_t mid = (flat * 64 + 64) + gru_count(64, 64) + (64 * flat + flat);
  const std::size_t dec = conv_count(64, 16, 3, 5) + conv_count(32, 8, 3, 5) + conv_count(16, 2, 3, 5);
  EXPECT_EQ(s.parameter_count(), enc + mid + dec);
  EXPECT_EQ(s.parameter_count(), 197106u);
  EXPECT_LE(s.parameter_count(), 200000u);
}

TEST(PemShapes, BothVariantsMapFramesByBinsOntoItself) {
  for (auto kind : {PemKind::kMask, PemKind::kCrn}) {
    ParamStore<double> s;
    auto pem = make_pem(s, config(kind));
    s.initialize(3);
    EXPECT_EQ(pem->kind(), kind);
    EXPECT_EQ(pem->forward(spectrum(41, 1)).shape(), (compute::Shape{41, 514}));
    EXPECT_EQ(pem->forward(spectrum(1, 2)).shape(), (compute::Shape{1, 514}));
    EXPECT_THROW(pem->forward(TD::zeros({4, 512})), ShapeError);
  }
}

TEST(PemKindNames, ParseRoundTrip) {
  EXPECT_EQ(parse_pem_kind("mask"), PemKind::kMask);
  EXPECT_EQ(parse_pem_kind(to_string(PemKind::kCrn)), PemKind::kCrn);
  EXPECT_THROW(parse_pem_kind("dpcrn"), ConfigError);
}

TEST(MaskPem, KeepsPhaseAndNeverAmplifies) {
  ParamStore<double> s;
  MaskPem<double> pem(s, config(PemKind::kMask));
  s.initialize(5);
  auto x = spectrum(12, 7);
  auto p = pem.forward(x);
  const auto& xv = x.value();
  const auto& pv = p.value();
  for (std::size_t t = 0; t < 12; ++t)
    for (std::size_t f = 0; f < 257; ++f) {
      const double xr = xv[t * 514 + f], xi = xv[t * 514 + 257 + f];
      const double pr = pv[t * 514 + f], pi = pv[t * 514 + 257 + f];
      EXPECT_LE(std::hypot(pr, pi), std::hypot(xr, xi) * (1 + 1e-12));
      if (std::hypot(xr, xi) > 0) {
        double d = std::remainder(std::atan2(pi, pr) - std::atan2(xi, xr), 2 * std::numbers::pi);
        EXPECT_LE(std::abs(d), 1e-6);
      }
    }
}

TEST(MaskPem, ZeroFrameStaysZero) {
  for (auto kind : {PemKind::kMask, PemKind::kCrn}) {
    ParamStore<double> s;
    auto pem = make_pem(s, config(kind));
    s.initialize(9);
    auto x = spectrum(6, 4);
    for (std::size_t f = 0; f < 514; ++f) x.mutable_value()[3 * 514 + f] = 0.0;
    auto p = pem->forward(x);
    for (std::size_t f = 0; f < 514; ++f) EXPECT_EQ(p.value()[3 * 514 + f], 0.0) << to_string(kind);
  }
}

TEST(CrnPem, StartsAsTheIdentity) {
  ParamStore<double> s;
  auto pem = make_pem(s, config(PemKind::kCrn));
  s.initialize(4);
  auto x = spectrum(12, 5);
  EXPECT_EQ(pem->forward(x).value(), x.value());
}

TEST(PemCausality, FutureFramesDoNotLeakBackwards) {
  for (auto kind : {PemKind::kMask, PemKind::kCrn}) {
    ParamStore<double> s;
    auto pem = make_pem(s, config(kind));
    s.initialize(11);
    rui::testing::perturb(s, 11);
    auto x = spectrum(16, 21);
    auto base = pem->forward(x).value();
    const std::size_t t = 9;
    auto y = TD::constant(x.shape(), x.value());
    for (std::size_t f = 0; f < 514; ++f) y.mutable_value()[t * 514 + f] += 3.0 + f % 7;
    auto moved = pem->forward(y).value();
    for (std::size_t i = 0; i < t * 514; ++i) ASSERT_EQ(moved[i], base[i]) << to_string(kind) << " @" << i;
    bool changed = false;
    for (std::size_t i = t * 514; i < moved.size(); ++i) changed |= moved[i] != base[i];
    EXPECT_TRUE(changed) << to_string(kind);
  }
}

TEST(PemDeterminism, RepeatedForwardIsBitwiseIdentical) {
  ParamStore<double> s;
  CrnPem<double> pem(s, config(PemKind::kCrn));
  s.initialize(2);
  auto x = spectrum(8, 3);
  EXPECT_EQ(pem.forward(x).value(), pem.forward(x).value());
}

class PemGradients : public ::testing::TestWithParam<PemKind> {};

TEST_P(PemGradients, PassFiniteDifferenceCheck) {
  ParamStore<double> s;
  auto pem = make_pem(s, config(GetParam()));
  s.initialize(17);
  rui::testing::perturb(s, 18);
  auto x = random_tensor({6, 514}, 23, false, -2.0, 2.0);
  auto w = random_tensor({6, 514}, 24, false);
  compute::GradCheckOptions opt;
  opt.tol = 1e-4;
  opt.coords = 12;
  auto report = compute::grad_check([&] { return compute::sum(compute::mul(pem->forward(x), w)); }, s, opt);
  EXPECT_TRUE(report.passed()) << report.summary();
  EXPECT_EQ(report.entries.size(), s.size());
}

INSTANTIATE_TEST_SUITE_P(Variants, PemGradients, ::testing::Values(PemKind::kMask, PemKind::kCrn),
                         [](const auto& info) { return to_string(info.param); });

}  // namespace
}  // namespace rui
