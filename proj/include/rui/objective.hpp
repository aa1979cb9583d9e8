// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training objective and evaluation metrics: SI-SDR (metric and loss), a
// bark-band log-power distortion, and STOI.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "rui/audio.hpp"
#include "rui/compute/nn.hpp"
#include "rui/compute/signal.hpp"
#include "rui/fft.hpp"

namespace rui {

inline constexpr double kSiSdrCapDb = 60.0;

/// 10 log10(|a r|^2 / (|est - a r|^2 + 1e-12)), a = <est, r> / |r|^2, capped at 60 dB.
template <typename A, typename B>
double si_sdr(std::span<const A> ref, std::span<const B> est) {
  if (ref.size() != est.size())
    throw ShapeError("si_sdr: reference has " + std::to_string(ref.size()) +
                     " samples, estimate " + std::to_string(est.size()));
  if (ref.empty()) throw ShapeError("si_sdr: empty input");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += static_cast<double>(ref[i]) * static_cast<double>(ref[i]);
    er += static_cast<double>(est[i]) * static_cast<double>(ref[i]);
  }
  if (rr == 0.0) throw ReferenceError("si_sdr: reference signal is all zeros");
  const double alpha = er / rr;
  double tt = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = alpha * static_cast<double>(ref[i]);
    const double e = static_cast<double>(est[i]) - t;
    tt += t * t;
    ee += e * e;
  }
  return std::min(kSiSdrCapDb, 10.0 * std::log10(tt / (ee + 1e-12)));
}

inline double si_sdr(const AudioClip& ref, const AudioClip& est) {
  return si_sdr(std::span<const float>(ref.samples), std::span<const float>(est.samples));
}

/// Negative SI-SNR on the graph (epsilon 1e-8, no cap). `ref` is a constant.
template <typename T>
compute::Tensor<T> si_snr_loss(const compute::Tensor<T>& ref, const compute::Tensor<T>& est) {
  using namespace compute;
  if (ref.shape() != est.shape())
    throw ShapeError("si_snr_loss: shapes " + to_string(ref.shape()) + " and " +
                     to_string(est.shape()) + " differ");
  T rr = 0;
  for (T v : ref.value()) rr += v * v;
  if (rr == T(0)) throw ReferenceError("si_snr_loss: reference signal is all zeros");
  auto alpha = scale(sum(mul(est, ref)), T(1) / rr);
  auto target = mul(ref, alpha);
  auto err = sub(est, target);
  auto ratio = div(sum(square(target)), add_scalar(sum(square(err)), T(1e-8)));
  return scale(log10(ratio), T(-10));
}

// ---------------------------------------------------------------------------
// Bark-band perceptual surrogate.

inline double hz_to_bark(double hz) {
  return 13.0 * std::atan(0.00076 * hz) + 3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

/// [bands x bins] triangular filters with unit peak, centres uniformly spaced
/// on the bark scale between 0 Hz and fs / 2 (edges at the neighbouring centres).
inline std::vector<double> bark_filterbank(std::size_t bands, std::size_t bins, double fs) {
  if (bands == 0) throw ConfigError("perceptual band count must be positive");
  const double top = hz_to_bark(fs / 2.0);
  const double step = top / static_cast<double>(bands + 1);
  std::vector<double> w(bands * bins, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    const double z = hz_to_bark(static_cast<double>(f) * (fs / 2.0) / static_cast<double>(bins - 1));
    for (std::size_t b = 0; b < bands; ++b) {
      const double c = step * static_cast<double>(b + 1);
      const double v = 1.0 - std::abs(z - c) / step;
      if (v > 0) w[b * bins + f] = v;
    }
  }
  for (std::size_t b = 0; b < bands; ++b) {
    double s = 0.0;
    for (std::size_t f = 0; f < bins; ++f) s += w[b * bins + f];
    if (s == 0.0) throw ConfigError("bark band " + std::to_string(b) + " covers no FFT bin");
  }
  return w;
}

inline constexpr double kPerceptualEps = 1e-10;

/// Band powers [T, bands] of a [T, 2F] spectrum: sum_f w[b, f] (re^2 + im^2).
template <typename T>
compute::Tensor<T> band_powers(const compute::Tensor<T>& spec, std::size_t bands = 24,
                               double fs = 16000.0) {
  using namespace compute;
  if (spec.rank() != 2 || spec.dim(1) % 2 != 0)
    throw ShapeError("band_powers expects [T, 2F], got " + to_string(spec.shape()));
  const std::size_t bins = spec.dim(1) / 2;
  const auto w = bark_filterbank(bands, bins, fs);
  std::vector<T> wt(bins * bands);
  for (std::size_t b = 0; b < bands; ++b)
    for (std::size_t f = 0; f < bins; ++f) wt[f * bands + b] = static_cast<T>(w[b * bins + f]);
  auto power = add(square(slice(spec, 1, 0, bins)), square(slice(spec, 1, bins, 2 * bins)));
  return matmul(power, Tensor<T>::constant({bins, bands}, std::move(wt)));
}

/// Per-entry (log10(B_est + eps) - log10(B_ref + eps))^2.
template <typename T>
compute::Tensor<T> band_distortion(const compute::Tensor<T>& ref_bands,
                                   const compute::Tensor<T>& est_bands) {
  using namespace compute;
  const T eps = static_cast<T>(kPerceptualEps);
  return square(sub(log10(add_scalar(est_bands, eps)), log10(add_scalar(ref_bands, eps))));
}

template <typename T>
compute::Tensor<T> perceptual_loss(const compute::Tensor<T>& ref_spec,
                                   const compute::Tensor<T>& est_spec, std::size_t bands = 24) {
  if (ref_spec.shape() != est_spec.shape())
    throw ShapeError("perceptual_loss: shapes " + compute::to_string(ref_spec.shape()) + " and " +
                     compute::to_string(est_spec.shape()) + " differ");
  return compute::mean(band_distortion(band_powers(ref_spec, bands), band_powers(est_spec, bands)));
}

struct LossWeights {
  double si_snr = 1.0;
  double perceptual = 0.2;
};

template <typename T>
struct LossBreakdown {
  compute::Tensor<T> total;
  double si_snr_term = 0.0;
  double perceptual_term = 0.0;
  LossWeights weights;
};

/// w_sisnr * si_snr_loss(ref_wave, est_wave) + w_perc * perceptual_loss(ref_spec, est_spec).
template <typename T>
LossBreakdown<T> combined_loss(const compute::Tensor<T>& ref_wave, const compute::Tensor<T>& est_wave,
                               const compute::Tensor<T>& ref_spec, const compute::Tensor<T>& est_spec,
                               LossWeights w, std::size_t bands = 24) {
  using namespace compute;
  LossBreakdown<T> out;
  out.weights = w;
  auto a = si_snr_loss(ref_wave, est_wave);
  auto b = perceptual_loss(ref_spec, est_spec, bands);
  out.si_snr_term = static_cast<double>(a.item());
  out.perceptual_term = static_cast<double>(b.item());
  out.total = add(scale(a, static_cast<T>(w.si_snr)), scale(b, static_cast<T>(w.perceptual)));
  return out;
}

// ---------------------------------------------------------------------------
// STOI. 10 kHz resampling with an Octave-compatible Kaiser FIR, silent-frame
// removal on the clean signal, 1/3-octave envelopes over 30-frame segments,
// normalization and clipping of the processed envelope, mean correlation.

namespace stoi_detail {

inline constexpr int kFs = 10000;
inline constexpr std::size_t kFrame = 256;
inline constexpr std::size_t kNfft = 512;
inline constexpr std::size_t kBands = 15;
inline constexpr double kMinFreq = 150.0;
inline constexpr std::size_t kSegment = 30;
inline constexpr double kBeta = -15.0;
inline constexpr double kDynRange = 40.0;
inline constexpr double kEps = 2.220446049250313e-16;

/// Kaiser-windowed sinc for rational resampling by p / q (reduced), normalized to unit sum.
inline std::vector<double> resample_filter(int p, int q) {
  const int g = std::gcd(p, q);
  p /= g;
  q /= g;
  const double cutoff = 1.0 / (2.0 * std::max(p, q));
  const double roll_off = cutoff / 10.0;
  const double rejection_db = 60.0;
  const auto half = static_cast<long>(std::ceil((rejection_db - 8.0) / (28.714 * roll_off)));
  const double beta = 0.1102 * (rejection_db - 8.7);
  const double m = static_cast<double>(2 * half);
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  const double i0b = std::cyl_bessel_i(0.0, beta);
  double total = 0.0;
  for (long n = -half; n <= half; ++n) {
    const double x = 2.0 * cutoff * static_cast<double>(n);
    const double sinc = n == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
    const double r = 2.0 * static_cast<double>(n + half) / m - 1.0;
    const double kaiser = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
    const double v = kaiser * 2.0 * p * cutoff * sinc;
    h[static_cast<std::size_t>(n + half)] = v;
    total += v;
  }
  for (auto& v : h) v /= total;
  return h;
}

/// Polyphase upsample by `up`, filter with up * h (delay-compensated), keep every `down`-th.
inline std::vector<double> resample_poly(std::span<const double> x, int up, int down,
                                         const std::vector<double>& h) {
  const std::size_t n_in = x.size();
  const std::size_t n_out = (n_in * up + down - 1) / down;
  const long half = static_cast<long>(h.size() - 1) / 2;
  std::vector<double> y(n_out, 0.0);
  for (std::size_t m = 0; m < n_out; ++m) {
    const long centre = static_cast<long>(m) * down + half;  // index into the upsampled signal
    // j runs over taps with (centre - j) divisible by up and inside the input.
    long j0 = centre % up;
    double acc = 0.0;
    for (long j = j0; j < static_cast<long>(h.size()); j += up) {
      const long idx = (centre - j) / up;
      if (idx < 0) break;
      if (idx >= static_cast<long>(n_in)) continue;
      acc += h[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(idx)];
    }
    y[m] = acc * up;
  }
  return y;
}

/// Symmetric Hann of length n without its zero end points.
inline std::vector<double> hanning_inner(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                static_cast<double>(n + 1));
  return w;
}

inline void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const std::size_t len = kFrame, hop = kFrame / 2;
  const auto w = hanning_inner(len);
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + len < x.size(); i += hop) starts.push_back(i);
  std::vector<double> energy(starts.size());
  double peak = -1e300;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
      const double v = w[n] * x[starts[k] + n];
      s += v * v;
    }
    energy[k] = 20.0 * std::log10(std::sqrt(s) + kEps);
    peak = std::max(peak, energy[k]);
  }
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < starts.size(); ++k)
    if (peak - kDynRange - energy[k] < 0) keep.push_back(starts[k]);
  const std::size_t out_len = keep.empty() ? 0 : (keep.size() - 1) * hop + len;
  std::vector<double> xo(out_len, 0.0), yo(out_len, 0.0);
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (std::size_t n = 0; n < len; ++n) {
      xo[k * hop + n] += w[n] * x[keep[k] + n];
      yo[k * hop + n] += w[n] * y[keep[k] + n];
    }
  x = std::move(xo);
  y = std::move(yo);
}

/// Band index ranges [lo, hi) of the 1/3-octave bands on the 512-point grid at 10 kHz.
inline std::vector<std::pair<std::size_t, std::size_t>> third_octave_bands() {
  const std::size_t bins = kNfft / 2 + 1;
  auto nearest = [&](double hz) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t f = 0; f < bins; ++f) {
      const double d = static_cast<double>(f) * kFs / static_cast<double>(kNfft) - hz;
      if (d * d < bd) {
        bd = d * d;
        best = f;
      }
    }
    return best;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < kBands; ++k) {
    const double kk = static_cast<double>(k);
    out.emplace_back(nearest(kMinFreq * std::pow(2.0, (2 * kk - 1) / 6)),
                     nearest(kMinFreq * std::pow(2.0, (2 * kk + 1) / 6)));
  }
  return out;
}

/// [frames][bands] 1/3-octave magnitudes of 256-sample Hann frames at 50% overlap.
inline std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x) {
  const auto w = hanning_inner(kFrame);
  const auto bands = third_octave_bands();
  RealFft fft(kNfft);
  std::vector<double> frame(kNfft, 0.0);
  std::vector<std::complex<double>> spec(kNfft / 2 + 1);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i + kFrame < x.size(); i += kFrame / 2) {
    for (std::size_t n = 0; n < kFrame; ++n) frame[n] = w[n] * x[i + n];
    fft.forward(frame, spec);
    std::vector<double> env(kBands);
    for (std::size_t b = 0; b < kBands; ++b) {
      double s = 0.0;
      for (std::size_t f = bands[b].first; f < bands[b].second; ++f) s += std::norm(spec[f]);
      env[b] = std::sqrt(s);
    }
    out.push_back(std::move(env));
  }
  return out;
}

}  // namespace stoi_detail

/// 16 kHz -> 10 kHz resampling as used by the STOI front end.
inline std::vector<double> resample_16k_to_10k(std::span<const double> x) {
  static const auto h = stoi_detail::resample_filter(stoi_detail::kFs, 16000);
  return stoi_detail::resample_poly(x, 5, 8, h);
}

/// Short-time objective intelligibility of `est` against the clean `ref` (both 16 kHz).
inline double stoi(const AudioClip& ref, const AudioClip& est) {
  using namespace stoi_detail;
  if (ref.samples.size() != est.samples.size())
    throw ShapeError("stoi: reference and estimate lengths differ");
  require_pipeline_rate(ref);
  require_pipeline_rate(est);
  std::vector<double> x(ref.samples.begin(), ref.samples.end());
  std::vector<double> y(est.samples.begin(), est.samples.end());
  x = resample_16k_to_10k(x);
  y = resample_16k_to_10k(y);
  remove_silent_frames(x, y);
  const auto xe = band_envelopes(x);
  const auto ye = band_envelopes(y);
  if (xe.size() < kSegment)
    throw LengthError("stoi: " + std::to_string(xe.size()) +
                      " active frames after silence removal, need " + std::to_string(kSegment));
  const double clip = std::pow(10.0, -kBeta / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(kSegment), ys(kSegment);
  for (std::size_t m = kSegment; m <= xe.size(); ++m) {
    for (std::size_t b = 0; b < kBands; ++b) {
      double nx = 0.0, ny = 0.0;
      for (std::size_t k = 0; k < kSegment; ++k) {
        xs[k] = xe[m - kSegment + k][b];
        ys[k] = ye[m - kSegment + k][b];
        nx += xs[k] * xs[k];
        ny += ys[k] * ys[k];
      }
      const double g = std::sqrt(nx) / (std::sqrt(ny) + kEps);
      double mx = 0.0, my = 0.0;
      for (std::size_t k = 0; k < kSegment; ++k) {
        ys[k] = std::min(ys[k] * g, xs[k] * (1.0 + clip));
        mx += xs[k];
        my += ys[k];
      }
      mx /= kSegment;
      my /= kSegment;
      double sx = 0.0, sy = 0.0;
      for (std::size_t k = 0; k < kSegment; ++k) {
        xs[k] -= mx;
        ys[k] -= my;
        sx += xs[k] * xs[k];
        sy += ys[k] * ys[k];
      }
      sx = std::sqrt(sx) + kEps;
      sy = std::sqrt(sy) + kEps;
      double c = 0.0;
      for (std::size_t k = 0; k < kSegment; ++k) c += (xs[k] / sx) * (ys[k] / sy);
      total += c;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace rui
