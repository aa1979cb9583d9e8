// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Pre-enhancement modules. Both map a noisy spectrum [T, 2F] to a preliminary
// estimate p of the same shape and are time-causal.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <string>

#include "rui/compute/nn.hpp"
#include "rui/compute/params.hpp"

namespace rui {

enum class PemKind { kMask, kCrn };

inline PemKind parse_pem_kind(const std::string& s) {
  if (s == "mask") return PemKind::kMask;
  if (s == "crn") return PemKind::kCrn;
  throw ConfigError("pem.kind must be 'mask' or 'crn', got '" + s + "'");
}

inline std::string to_string(PemKind k) { return k == PemKind::kMask ? "mask" : "crn"; }

struct PemConfig {
  PemKind kind = PemKind::kCrn;
  std::size_t bins = 257;
  std::size_t crn_width = 8;     // encoder channels are width, 2 width, 4 width
  std::size_t crn_hidden = 64;
  std::size_t mask_hidden = 128;
};

template <typename T>
struct GruParams {
  compute::Tensor<T> w_ih, w_hh, b_ih, b_hh;

  GruParams() = default;
  GruParams(compute::ParamStore<T>& s, const std::string& p, std::size_t in, std::size_t hidden) {
    using compute::Init;
    w_ih = s.add(p + ".w_ih", {3 * hidden, in}, Init::kFanInUniform, in);
    w_hh = s.add(p + ".w_hh", {3 * hidden, hidden}, Init::kFanInUniform, hidden);
    b_ih = s.add(p + ".b_ih", {3 * hidden}, Init::kZeros);
    b_hh = s.add(p + ".b_hh", {3 * hidden}, Init::kZeros);
  }
  compute::Tensor<T> operator()(const compute::Tensor<T>& x) const {
    return compute::gru(x, w_ih, w_hh, b_ih, b_hh);
  }
};

template <typename T>
struct DenseParams {
  compute::Tensor<T> weight, bias;

  DenseParams() = default;
  DenseParams(compute::ParamStore<T>& s, const std::string& p, std::size_t in, std::size_t out) {
    weight = s.add(p + ".weight", {out, in}, compute::Init::kFanInUniform, in);
    bias = s.add(p + ".bias", {out}, compute::Init::kZeros);
  }
  compute::Tensor<T> operator()(const compute::Tensor<T>& x) const {
    return compute::linear(x, weight, bias);
  }
};

template <typename T>
struct ConvParams {
  compute::Tensor<T> weight, bias;
  compute::ConvOptions opt;

  ConvParams() = default;
  /// Weight layout [Cout, Cin, KT, KF]; `zero` starts weight and bias at 0.
  ConvParams(compute::ParamStore<T>& s, const std::string& p, std::size_t cin, std::size_t cout,
             std::size_t kt, std::size_t kf, compute::ConvOptions o, bool zero = false)
      : opt(o) {
    using compute::Init;
    weight = s.add(p + ".weight", {cout, cin, kt, kf}, zero ? Init::kZeros : Init::kFanInUniform,
                   cin * kt * kf);
    bias = s.add(p + ".bias", {cout}, Init::kZeros);
  }
  compute::Tensor<T> operator()(const compute::Tensor<T>& x) const {
    return compute::conv2d(x, weight, bias, opt);
  }
};

template <typename T>
struct DeconvParams {
  compute::Tensor<T> weight, bias;
  compute::ConvOptions opt;

  DeconvParams() = default;
  /// Weight layout [Cin, Cout, KT, KF].
  DeconvParams(compute::ParamStore<T>& s, const std::string& p, std::size_t cin, std::size_t cout,
               std::size_t kt, std::size_t kf, compute::ConvOptions o,
               compute::Init init = compute::Init::kFanInUniform)
      : opt(o) {
    weight = s.add(p + ".weight", {cin, cout, kt, kf}, init, cin * kt * kf);
    bias = s.add(p + ".bias", {cout}, compute::Init::kZeros);
  }
  compute::Tensor<T> operator()(const compute::Tensor<T>& x) const {
    return compute::conv_transpose2d(x, weight, bias, opt);
  }
};

template <typename T>
struct NormParams {
  compute::Tensor<T> gamma, beta;

  NormParams() = default;
  NormParams(compute::ParamStore<T>& s, const std::string& p, compute::Shape shape) {
    gamma = s.add(p + ".gamma", shape, compute::Init::kOnes);
    beta = s.add(p + ".beta", shape, compute::Init::kZeros);
  }
  compute::Tensor<T> operator()(const compute::Tensor<T>& x) const {
    return compute::layer_norm(x, gamma, beta);
  }
};

template <typename T>
class Pem {
 public:
  virtual ~Pem() = default;
  virtual PemKind kind() const = 0;
  /// x: [T, 2F] noisy spectrum, returns p: [T, 2F].
  virtual compute::Tensor<T> forward(const compute::Tensor<T>& x) const = 0;

 protected:
  static void check_input(const compute::Tensor<T>& x, std::size_t bins) {
    if (x.rank() != 2 || x.dim(1) != 2 * bins)
      throw ShapeError("pem expects [T, " + std::to_string(2 * bins) + "], got " +
                       compute::to_string(x.shape()));
    if (x.dim(0) < 1) throw ShapeError("pem input has no frames");
  }
};

/// Magnitude mask over log-magnitude features; the noisy phase is kept.
///   feat = LayerNorm(log max(|X|, 1e-10));  h = GRU(GRU(feat));  m = sigmoid(W h + b)
///   p = [m | m] * X
template <typename T>
class MaskPem final : public Pem<T> {
 public:
  MaskPem(compute::ParamStore<T>& s, const PemConfig& cfg)
      : bins_(cfg.bins),
        norm_(s, "pem.norm", {cfg.bins}),
        rnn1_(s, "pem.rnn1", cfg.bins, cfg.mask_hidden),
        rnn2_(s, "pem.rnn2", cfg.mask_hidden, cfg.mask_hidden),
        head_(s, "pem.head", cfg.mask_hidden, cfg.bins) {}

  PemKind kind() const override { return PemKind::kMask; }

  compute::Tensor<T> mask(const compute::Tensor<T>& x) const {
    using namespace compute;
    this->check_input(x, bins_);
    const std::size_t frames = x.dim(0);
    std::vector<T> feat(frames * bins_);
    const auto& v = x.value();
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < bins_; ++f) {
        const T re = v[t * 2 * bins_ + f], im = v[t * 2 * bins_ + bins_ + f];
        feat[t * bins_ + f] = std::log(std::max<T>(std::sqrt(re * re + im * im), T(1e-10)));
      }
    auto h = rnn2_(rnn1_(norm_(Tensor<T>::constant({frames, bins_}, std::move(feat)))));
    return sigmoid(head_(h));
  }

  compute::Tensor<T> forward(const compute::Tensor<T>& x) const override {
    using namespace compute;
    auto m = mask(x);
    return mul(concat<T>({m, m}, 1), x);
  }

 private:
  std::size_t bins_;
  NormParams<T> norm_;
  GruParams<T> rnn1_, rnn2_;
  DenseParams<T> head_;
};

/// Convolutional recurrent network estimating a complex ratio mask.
///   encoder: three causal 3x5 convolutions, frequency stride 2, each followed
///            by per-frame layer norm and ReLU (257 -> 129 -> 65 -> 33 bins)
///   bottleneck: dense to hidden, GRU, dense back to the encoder width
///   decoder: transposed convolutions mirroring the encoder, each fed the
///            concatenation of the previous stage and the matching skip
///   p = X * (1 + D)  (complex product; D is the 2-channel decoder output and
///                     the last decoder starts at zero, so p = X at init)
template <typename T>
class CrnPem final : public Pem<T> {
 public:
  CrnPem(compute::ParamStore<T>& s, const PemConfig& cfg) : bins_(cfg.bins) {
    using compute::ConvOptions;
    const ConvOptions down{2, 2};
    const std::size_t w = cfg.crn_width;
    chans_ = {2, w, 2 * w, 4 * w};
    widths_ = {bins_};
    for (int i = 0; i < 3; ++i) widths_.push_back(compute::conv_out_bins(widths_.back(), 5, down));
    for (int i = 0; i < 3; ++i) {
      const std::string p = "pem.enc" + std::to_string(i + 1);
      enc_[i] = ConvParams<T>(s, p, chans_[i], chans_[i + 1], 3, 5, down);
      enc_norm_[i] = NormParams<T>(s, p + ".norm", {chans_[i + 1], widths_[i + 1]});
    }
    const std::size_t flat = chans_[3] * widths_[3];
    rnn_in_ = DenseParams<T>(s, "pem.rnn.in", flat, cfg.crn_hidden);
    rnn_ = GruParams<T>(s, "pem.rnn", cfg.crn_hidden, cfg.crn_hidden);
    rnn_out_ = DenseParams<T>(s, "pem.rnn.out", cfg.crn_hidden, flat);
    for (int i = 2; i >= 0; --i) {
      dec_[i] = DeconvParams<T>(s, "pem.dec" + std::to_string(i + 1), 2 * chans_[i + 1], chans_[i],
                                3, 5, down, i == 0 ? compute::Init::kZeros : compute::Init::kFanInUniform);
      if (compute::conv_transpose_out_bins(widths_[i + 1], 5, down) != widths_[i])
        throw ConfigError("crn decoder cannot restore " + std::to_string(widths_[i]) + " bins");
    }
  }

  PemKind kind() const override { return PemKind::kCrn; }

  compute::Tensor<T> mask_delta(const compute::Tensor<T>& x) const {
    using namespace compute;
    this->check_input(x, bins_);
    const std::size_t frames = x.dim(0);
    std::array<Tensor<T>, 4> e;
    e[0] = reshape(x, {frames, 2, bins_});
    for (int i = 0; i < 3; ++i) e[i + 1] = relu(enc_norm_[i](enc_[i](e[i])));
    auto z = reshape(e[3], {frames, chans_[3] * widths_[3]});
    z = reshape(rnn_out_(rnn_(rnn_in_(z))), {frames, chans_[3], widths_[3]});
    Tensor<T> d = z;
    for (int i = 2; i >= 0; --i) {
      d = dec_[i](concat<T>({d, e[i + 1]}, 1));
      if (i > 0) d = relu(d);
    }
    return reshape(d, {frames, 2 * bins_});
  }

  compute::Tensor<T> forward(const compute::Tensor<T>& x) const override {
    using namespace compute;
    auto d = mask_delta(x);
    auto xr = slice(x, 1, 0, bins_), xi = slice(x, 1, bins_, 2 * bins_);
    auto dr = slice(d, 1, 0, bins_), di = slice(d, 1, bins_, 2 * bins_);
    return add(x, concat<T>({sub(mul(xr, dr), mul(xi, di)), add(mul(xr, di), mul(xi, dr))}, 1));
  }

 private:
  std::size_t bins_;
  std::array<std::size_t, 4> chans_{};
  std::vector<std::size_t> widths_;
  std::array<ConvParams<T>, 3> enc_;
  std::array<NormParams<T>, 3> enc_norm_;
  DenseParams<T> rnn_in_;
  GruParams<T> rnn_;
  DenseParams<T> rnn_out_;
  std::array<DeconvParams<T>, 3> dec_;
};

template <typename T>
std::unique_ptr<Pem<T>> make_pem(compute::ParamStore<T>& s, const PemConfig& cfg) {
  if (cfg.kind == PemKind::kMask) return std::make_unique<MaskPem<T>>(s, cfg);
  return std::make_unique<CrnPem<T>>(s, cfg);
}

}  // namespace rui
