// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "rui/audio.hpp"
#include "rui/error.hpp"
#include "rui/fft.hpp"

namespace rui {

/// Analysis/synthesis framing. 32 ms Hann window at 16 kHz, 512-point FFT.
struct StftConfig {
  std::size_t window_len = 512;
  std::size_t hop = 384;
  std::size_t fft_size = 512;
  std::vector<double> window;

  std::size_t bins() const noexcept { return fft_size / 2 + 1; }

  std::size_t frames_for(std::size_t samples) const {
    if (samples < window_len) return 0;
    return 1 + (samples - window_len) / hop;
  }
};

/// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

inline StftConfig make_stft_config(std::size_t hop = 384) {
  StftConfig cfg;
  cfg.hop = hop;
  cfg.window = hann_window(cfg.window_len);
  if (cfg.hop == 0 || cfg.hop >= cfg.window_len)
    throw ConfigError("STFT hop must satisfy 0 < hop < window_len");
  return cfg;
}

/// T x 2F real matrix, row t = [Re X(t, 0..F-1) | Im X(t, 0..F-1)].
template <typename Real>
struct BasicSpectrum {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<Real> data;

  BasicSpectrum() = default;
  BasicSpectrum(std::size_t t, std::size_t f) : frames(t), bins(f), data(t * 2 * f, Real(0)) {}

  std::size_t width() const noexcept { return 2 * bins; }
  Real& re(std::size_t t, std::size_t f) { return data[t * 2 * bins + f]; }
  Real& im(std::size_t t, std::size_t f) { return data[t * 2 * bins + bins + f]; }
  Real re(std::size_t t, std::size_t f) const { return data[t * 2 * bins + f]; }
  Real im(std::size_t t, std::size_t f) const { return data[t * 2 * bins + bins + f]; }
  Real magnitude(std::size_t t, std::size_t f) const { return std::hypot(re(t, f), im(t, f)); }
};

using ComplexSpectrum = BasicSpectrum<float>;

inline void check_config(const StftConfig& cfg) {
  if (cfg.window.size() != cfg.window_len || cfg.window_len != cfg.fft_size ||
      cfg.hop == 0 || cfg.hop >= cfg.window_len)
    throw ConfigError("inconsistent STFT configuration");
}

template <typename Real = float, typename Sample>
BasicSpectrum<Real> stft(std::span<const Sample> x, const StftConfig& cfg) {
  check_config(cfg);
  if (x.size() < cfg.window_len)
    throw LengthError("signal of " + std::to_string(x.size()) +
                      " samples is shorter than one analysis window (" +
                      std::to_string(cfg.window_len) + ")");
  const std::size_t frames = cfg.frames_for(x.size());
  const std::size_t bins = cfg.bins();
  BasicSpectrum<Real> spec(frames, bins);
  RealFft fft(cfg.fft_size);
  std::vector<double> frame(cfg.fft_size);
  std::vector<std::complex<double>> out(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t n = 0; n < cfg.window_len; ++n)
      frame[n] = cfg.window[n] * static_cast<double>(x[start + n]);
    fft.forward(frame, out);
    for (std::size_t f = 0; f < bins; ++f) {
      // + 0 folds -0 into +0
      spec.re(t, f) = static_cast<Real>(out[f].real()) + Real(0);
      spec.im(t, f) = static_cast<Real>(out[f].imag()) + Real(0);
    }
  }
  return spec;
}

template <typename Real = float>
BasicSpectrum<Real> stft(const AudioClip& clip, const StftConfig& cfg) {
  return stft<Real>(std::span<const float>(clip.samples), cfg);
}

/// Smallest squared-window overlap sum over one hop of an unbounded frame train.
inline double wola_floor(const StftConfig& cfg) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < cfg.hop; ++n) {
    double s = 0.0;
    for (std::size_t k = n; k < cfg.window_len; k += cfg.hop) s += cfg.window[k] * cfg.window[k];
    lo = std::min(lo, s);
  }
  return lo;
}

/// Reciprocal of the squared-window overlap sum for `frames` frames, length
/// out_len. The sum is floored at wola_floor, so the interior is inverted
/// exactly and the outermost samples, which only a window tail reaches, fade
/// in and out instead of being amplified.
inline std::vector<double> wola_inverse_norm(const StftConfig& cfg, std::size_t frames,
                                             std::size_t out_len) {
  std::size_t span_len = frames == 0 ? 0 : (frames - 1) * cfg.hop + cfg.window_len;
  std::vector<double> norm(std::max(span_len, out_len), 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < cfg.window_len; ++n)
      norm[t * cfg.hop + n] += cfg.window[n] * cfg.window[n];
  const double floor = wola_floor(cfg);
  for (double& v : norm) v = 1.0 / std::max(v, floor);
  norm.resize(out_len);
  return norm;
}

/// Weighted overlap-add synthesis with squared-window normalization.
template <typename Real>
std::vector<double> istft_samples(const BasicSpectrum<Real>& spec, const StftConfig& cfg,
                                  std::size_t out_len) {
  check_config(cfg);
  if (spec.bins != cfg.bins() || spec.data.size() != spec.frames * 2 * spec.bins)
    throw ShapeError("spectrum has " + std::to_string(spec.bins) + " bins, expected " +
                     std::to_string(cfg.bins()));
  RealFft fft(cfg.fft_size);
  const std::size_t bins = cfg.bins();
  const std::size_t span_len =
      spec.frames == 0 ? 0 : (spec.frames - 1) * cfg.hop + cfg.window_len;
  std::vector<double> acc(std::max(span_len, out_len), 0.0);
  std::vector<std::complex<double>> frame_spec(bins);
  std::vector<double> frame(cfg.fft_size);
  const double scale = 1.0 / static_cast<double>(cfg.fft_size);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t f = 0; f < bins; ++f)
      frame_spec[f] = {static_cast<double>(spec.re(t, f)), static_cast<double>(spec.im(t, f))};
    fft.inverse(frame_spec, frame);
    for (std::size_t n = 0; n < cfg.window_len; ++n)
      acc[t * cfg.hop + n] += cfg.window[n] * frame[n] * scale;
  }
  std::vector<double> inv = wola_inverse_norm(cfg, spec.frames, out_len);
  acc.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) acc[i] *= inv[i];
  return acc;
}

template <typename Real>
AudioClip istft(const BasicSpectrum<Real>& spec, const StftConfig& cfg, std::size_t out_len) {
  std::vector<double> y = istft_samples(spec, cfg, out_len);
  AudioClip clip;
  clip.samples.assign(y.begin(), y.end());
  return clip;
}

/// 8-bit grayscale PGM (P5): F rows with low frequency at the bottom, T columns,
/// magnitude in dB mapped linearly from [-80, 0] to [0, 255].
template <typename Real>
std::vector<unsigned char> spectrogram_pixels(const BasicSpectrum<Real>& spec) {
  std::vector<unsigned char> px(spec.frames * spec.bins);
  for (std::size_t f = 0; f < spec.bins; ++f) {
    std::size_t row = spec.bins - 1 - f;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      double mag = std::hypot(static_cast<double>(spec.re(t, f)),
                              static_cast<double>(spec.im(t, f)));
      double db = 20.0 * std::log10(mag + 1e-10);
      double level = std::clamp((db + 80.0) / 80.0, 0.0, 1.0);
      px[row * spec.frames + t] = static_cast<unsigned char>(std::lround(level * 255.0));
    }
  }
  return px;
}

template <typename Real>
void export_spectrogram(const BasicSpectrum<Real>& spec, const std::filesystem::path& path) {
  std::vector<unsigned char> px = spectrogram_pixels(spec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << spec.frames << ' ' << spec.bins << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace rui
