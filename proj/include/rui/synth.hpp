// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic corpus generator: speech-like clean utterances (voiced syllables
// with gliding pitch and formants, fricative bursts, pauses) and several
// stationary and non-stationary noise families.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rui/audio.hpp"

namespace rui::synth {

struct Voice {
  double f0 = 120.0;           // speaker mean pitch, Hz
  double formant_scale = 1.0;  // vocal-tract length factor
};

inline Voice random_voice(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Voice v;
  v.f0 = 85.0 * std::pow(255.0 / 85.0, u(rng));
  v.formant_scale = 0.85 + 0.35 * u(rng);
  return v;
}

namespace detail {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Vowel formant triples (F1, F2, F3) in Hz.
inline constexpr double kVowels[][3] = {{730, 1090, 2440}, {270, 2290, 3010}, {530, 1840, 2480},
                                        {570, 840, 2410},  {300, 870, 2240},  {660, 1720, 2410},
                                        {490, 1350, 1690}, {440, 1020, 2240}};

inline double formant_gain(double hz, const double* f, double scale) {
  double g = 0.0;
  const double bw[3] = {80.0, 110.0, 160.0};
  for (int i = 0; i < 3; ++i) {
    const double c = f[i] * scale, d = (hz - c) / bw[i];
    g += std::exp(-0.5 * d * d) * (i == 0 ? 1.0 : i == 1 ? 0.6 : 0.35);
  }
  return g + 0.02;  // spectral floor
}

/// One-pole high-pass filtered white noise.
inline void add_fricative(std::vector<double>& out, std::size_t start, std::size_t len, double amp,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double prev_in = 0.0, prev_out = 0.0;
  for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
    const double x = n(rng);
    const double y = 0.85 * (prev_out + x - prev_in);
    prev_in = x;
    prev_out = y;
    const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
    out[start + i] += amp * env * y;
  }
}

inline void normalize_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (m > 0)
    for (double& v : x) v *= peak / m;
}

inline AudioClip to_clip(const std::vector<double>& x) {
  AudioClip c;
  c.samples.assign(x.begin(), x.end());
  return c;
}

}  // namespace detail

/// A speech-like utterance of `samples` samples at 16 kHz.
inline std::vector<double> utterance(const Voice& voice, std::size_t samples, std::mt19937_64& rng) {
  using namespace detail;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(samples, 0.0);
  const double fs = kSampleRate;
  std::size_t pos = static_cast<std::size_t>(u(rng) * 0.2 * fs);
  double phase_base = 0.0;
  while (pos < samples) {
    // Syllable: optional fricative onset, then a voiced nucleus.
    if (u(rng) < 0.35) {
      const auto len = static_cast<std::size_t>((0.05 + 0.08 * u(rng)) * fs);
      add_fricative(out, pos, len, 0.08 + 0.1 * u(rng), rng);
      pos += len;
    }
    const auto len = static_cast<std::size_t>((0.12 + 0.25 * u(rng)) * fs);
    const auto& va = kVowels[rng() % 8];
    const auto& vb = kVowels[rng() % 8];
    const double f_start = voice.f0 * (0.85 + 0.3 * u(rng));
    const double f_end = voice.f0 * (0.8 + 0.3 * u(rng));
    const double amp = 0.5 + 0.5 * u(rng);
    const double vib = 4.0 + 2.0 * u(rng);
    double phase = phase_base;
    for (std::size_t i = 0; i < len && pos + i < samples; ++i) {
      const double a = static_cast<double>(i) / static_cast<double>(len);
      const double f0 = (f_start + (f_end - f_start) * a) *
                        (1.0 + 0.01 * std::sin(kTwoPi * vib * static_cast<double>(i) / fs));
      phase += kTwoPi * f0 / fs;
      double formants[3];
      for (int k = 0; k < 3; ++k) formants[k] = va[k] + (vb[k] - va[k]) * a;
      double s = 0.0;
      for (int h = 1; h * f0 < 7800.0; ++h) {
        const double hz = h * f0;
        s += formant_gain(hz, formants, voice.formant_scale) * std::sin(h * phase) / std::sqrt(h);
      }
      const double env = std::pow(std::sin(std::numbers::pi * a), 0.6);
      out[pos + i] += amp * env * s;
    }
    phase_base = std::fmod(phase, kTwoPi);
    pos += len;
    // Inter-syllable gap, occasionally a longer pause.
    pos += static_cast<std::size_t>((u(rng) < 0.15 ? 0.25 + 0.3 * u(rng) : 0.02 + 0.06 * u(rng)) * fs);
  }
  normalize_peak(out, 0.3 + 0.4 * u(rng));
  return out;
}

enum class NoiseKind { kWhite, kPink, kBrown, kBabble, kHum, kModulated };

inline constexpr NoiseKind kNoiseKinds[] = {NoiseKind::kWhite,  NoiseKind::kPink,
                                            NoiseKind::kBrown,  NoiseKind::kBabble,
                                            NoiseKind::kHum,    NoiseKind::kModulated};

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kBrown: return "brown";
    case NoiseKind::kBabble: return "babble";
    case NoiseKind::kHum: return "hum";
    case NoiseKind::kModulated: return "modulated";
  }
  return "white";
}

inline std::vector<double> noise(NoiseKind kind, std::size_t samples, std::mt19937_64& rng) {
  using namespace detail;
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(samples, 0.0);
  const double fs = kSampleRate;
  switch (kind) {
    case NoiseKind::kWhite:
      for (auto& v : out) v = n(rng);
      break;
    case NoiseKind::kPink: {
      // Paul Kellet's refined filter.
      double b[7] = {0, 0, 0, 0, 0, 0, 0};
      for (auto& v : out) {
        const double w = n(rng);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        v = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
      }
      break;
    }
    case NoiseKind::kBrown: {
      double acc = 0.0;
      for (auto& v : out) {
        acc = 0.995 * acc + n(rng);
        v = acc;
      }
      break;
    }
    case NoiseKind::kBabble: {
      const int talkers = 4 + static_cast<int>(rng() % 4);
      for (int t = 0; t < talkers; ++t) {
        Voice voice = random_voice(rng);
        auto s = utterance(voice, samples, rng);
        for (std::size_t i = 0; i < samples; ++i) out[i] += s[i];
      }
      break;
    }
    case NoiseKind::kHum: {
      const double mains = u(rng) < 0.5 ? 50.0 : 60.0;
      double amp[8];
      for (double& a : amp) a = 0.2 + u(rng);
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / fs;
        double v = 0.05 * n(rng);
        for (int h = 0; h < 8; ++h) v += amp[h] / (h + 1) * std::sin(kTwoPi * mains * (h + 1) * t);
        out[i] = v;
      }
      break;
    }
    case NoiseKind::kModulated: {
      const double rate = 2.0 + 6.0 * u(rng);
      double lp = 0.0;
      for (std::size_t i = 0; i < samples; ++i) {
        const double t = static_cast<double>(i) / fs;
        lp = 0.7 * lp + 0.3 * n(rng);
        out[i] = (0.55 + 0.45 * std::sin(kTwoPi * rate * t)) * lp;
      }
      break;
    }
  }
  normalize_peak(out, 0.5);
  return out;
}

inline AudioClip utterance_clip(const Voice& v, std::size_t samples, std::mt19937_64& rng) {
  return detail::to_clip(utterance(v, samples, rng));
}

inline AudioClip noise_clip(NoiseKind k, std::size_t samples, std::mt19937_64& rng) {
  return detail::to_clip(noise(k, samples, rng));
}

}  // namespace rui::synth
