// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Underlying information extractor: harmonic attention over a bank of comb
// templates, one per candidate fundamental frequency.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rui/compute/nn.hpp"
#include "rui/compute/params.hpp"

namespace rui {

/// P x F nonnegative comb templates, each row L1-normalized.
struct CombPitchMatrix {
  std::size_t rows = 0;
  std::size_t bins = 0;
  std::vector<double> entries;  // row-major P x F
  std::vector<double> pitch_grid;

  double at(std::size_t r, std::size_t f) const { return entries[r * bins + f]; }

  template <typename T>
  compute::Tensor<T> tensor() const {
    return compute::Tensor<T>::constant({rows, bins}, std::vector<T>(entries.begin(), entries.end()));
  }
  template <typename T>
  compute::Tensor<T> transposed_tensor() const {
    std::vector<T> v(rows * bins);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t f = 0; f < bins; ++f) v[f * rows + r] = static_cast<T>(entries[r * bins + f]);
    return compute::Tensor<T>::constant({bins, rows}, std::move(v));
  }
};

/// n candidates log-spaced over [lo, hi] Hz, both ends included.
inline std::vector<double> log_pitch_grid(double lo, double hi, std::size_t n) {
  if (n == 0) throw ConfigError("pitch grid needs at least one candidate");
  if (!(lo > 0) || hi < lo) throw ConfigError("pitch grid bounds must satisfy 0 < min <= max");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

/// For each pitch f0 and harmonic k = 1..kmax with k f0 < fs/2, a unit-peak
/// triangle centred on the fractional bin k f0 / (fs / fft_size) is sampled at
/// its two neighbouring integer bins; rows are then L1-normalized.
inline CombPitchMatrix build_comb_matrix(const std::vector<double>& pitch_grid, std::size_t bins,
                                         double fs, std::size_t fft_size, std::size_t kmax) {
  if (pitch_grid.empty()) throw ConfigError("empty pitch grid");
  if (kmax == 0) throw ConfigError("kmax must be at least 1");
  for (std::size_t i = 0; i < pitch_grid.size(); ++i) {
    if (pitch_grid[i] < 50.0 - 1e-9 || pitch_grid[i] > 500.0 + 1e-9)
      throw ConfigError("pitch candidate " + std::to_string(pitch_grid[i]) +
                        " Hz outside [50, 500]");
    if (i > 0 && pitch_grid[i] <= pitch_grid[i - 1])
      throw ConfigError("pitch grid must be strictly ascending");
  }
  CombPitchMatrix m;
  m.rows = pitch_grid.size();
  m.bins = bins;
  m.pitch_grid = pitch_grid;
  m.entries.assign(m.rows * bins, 0.0);
  const double bin_hz = fs / static_cast<double>(fft_size);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* row = m.entries.data() + r * bins;
    for (std::size_t k = 1; k <= kmax; ++k) {
      const double hz = static_cast<double>(k) * pitch_grid[r];
      if (hz >= fs / 2.0) break;
      const double pos = hz / bin_hz;
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const double frac = pos - static_cast<double>(lo);
      if (lo < bins) row[lo] += 1.0 - frac;
      if (lo + 1 < bins) row[lo + 1] += frac;
    }
    double total = 0.0;
    for (std::size_t f = 0; f < bins; ++f) total += row[f];
    if (total <= 0.0) throw ConfigError("comb row without support");
    for (std::size_t f = 0; f < bins; ++f) row[f] /= total;
  }
  return m;
}

struct HarmonicConfig {
  double pitch_min = 50.0;
  double pitch_max = 500.0;
  std::size_t pitch_bins = 64;
  std::size_t kmax = 16;
  double temperature = 0.1;
};

inline CombPitchMatrix make_comb(const HarmonicConfig& cfg, std::size_t bins = 257,
                                 double fs = 16000.0, std::size_t fft_size = 512) {
  return build_comb_matrix(log_pitch_grid(cfg.pitch_min, cfg.pitch_max, cfg.pitch_bins), bins, fs,
                           fft_size, cfg.kmax);
}

/// Intermediate products of one harmonic-attention pass over a magnitude block.
template <typename T>
struct HarmonicTemplate {
  compute::Tensor<T> salience;  // [T, P]  sum_f comb[r, f] |X[t, f]|
  compute::Tensor<T> weights;   // [T, P]  softmax over candidates
  compute::Tensor<T> harmonic;  // [T, F]  convex combination of comb rows
};

/// Salience is divided by its per-frame mean over candidates before the
/// temperature is applied, so the selection is invariant to input scale.
template <typename T>
HarmonicTemplate<T> harmonic_template(const compute::Tensor<T>& magnitude,
                                      const CombPitchMatrix& comb, double temperature) {
  using namespace compute;
  if (magnitude.rank() != 2 || magnitude.dim(1) != comb.bins)
    throw ShapeError("magnitude " + to_string(magnitude.shape()) + " does not match comb with " +
                     std::to_string(comb.bins) + " bins");
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  HarmonicTemplate<T> out;
  out.salience = matmul(magnitude, comb.transposed_tensor<T>());
  auto norm = add_scalar(mean_axis(out.salience, 1), T(1e-8));
  auto logits = scale(div(out.salience, norm), static_cast<T>(1.0 / temperature));
  out.weights = softmax(logits, 1);
  out.harmonic = matmul(out.weights, comb.tensor<T>());
  return out;
}

/// Harmonic attention producing the underlying flow a [T, C, F] from the noisy
/// spectrum: the input real and imaginary planes plus the attention-selected
/// harmonic template are projected by a learned causal 3x3 convolution.
template <typename T>
class HarmonicAttention {
 public:
  HarmonicAttention(compute::ParamStore<T>& store, std::shared_ptr<const CombPitchMatrix> comb,
                    HarmonicConfig cfg, std::size_t channels, const std::string& prefix = "uie")
      : comb_(std::move(comb)), cfg_(cfg), channels_(channels) {
    using compute::Init;
    weight_ = store.add(prefix + ".proj.weight", {channels, 3, 3, 3}, Init::kFanInUniform, 3 * 3 * 3);
    bias_ = store.add(prefix + ".proj.bias", {channels}, Init::kZeros);
  }

  std::size_t channels() const { return channels_; }
  const CombPitchMatrix& comb() const { return *comb_; }

  compute::Tensor<T> forward(const compute::Tensor<T>& x) const {
    using namespace compute;
    const std::size_t frames = x.dim(0), bins = comb_->bins;
    if (x.rank() != 2 || x.dim(1) != 2 * bins)
      throw ShapeError("harmonic attention expects [T, " + std::to_string(2 * bins) + "], got " +
                       to_string(x.shape()));
    auto tmpl = harmonic_template(complex_abs(x), *comb_, cfg_.temperature);
    auto h = scale(tmpl.harmonic, static_cast<T>(cfg_.kmax));
    auto stacked = concat<T>({reshape(x, {frames, 2, bins}), reshape(h, {frames, 1, bins})}, 1);
    return relu(conv2d(stacked, weight_, bias_, {1, 1}));
  }

 private:
  std::shared_ptr<const CombPitchMatrix> comb_;
  HarmonicConfig cfg_;
  std::size_t channels_;
  compute::Tensor<T> weight_, bias_;
};

}  // namespace rui
