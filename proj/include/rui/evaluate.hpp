// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Per-utterance SI-SDR and STOI of noisy and enhanced signals over a manifest.

#pragma once

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rui/dataset.hpp"
#include "rui/objective.hpp"

namespace rui {

struct UttMetrics {
  std::string utt_id;
  double snr_db = 0.0;
  double si_sdr_noisy = 0.0;
  double si_sdr_enh = 0.0;
  double stoi_noisy = 0.0;
  double stoi_enh = 0.0;
};

struct EvalSummary {
  std::vector<UttMetrics> rows;
  double mean_si_sdr_noisy = 0.0;
  double mean_si_sdr_enh = 0.0;
  double mean_stoi_noisy = 0.0;
  double mean_stoi_enh = 0.0;

  double mean_improvement() const { return mean_si_sdr_enh - mean_si_sdr_noisy; }
};

/// Produces the enhanced waveform for one mixture (same length as `mix.noisy`).
using Enhancer = std::function<AudioClip(const Mixture& mix)>;

inline std::string utt_id(const MixSpec& r, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu", to_string(r.split).c_str(), index);
  return buf;
}

inline EvalSummary evaluate(const Manifest& m, const std::vector<MixSpec>& rows,
                            MixtureSource& src, const Enhancer& enhance) {
  MixtureSource::check_files(m, rows);
  EvalSummary s;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto mix = src.materialize(m, rows[i]);
    AudioClip enh = enhance(mix);
    if (enh.samples.size() != mix.noisy.samples.size())
      throw ShapeError("enhancer changed the length of " + rows[i].clean_path);
    UttMetrics u;
    u.utt_id = utt_id(rows[i], i);
    u.snr_db = rows[i].snr_db;
    u.si_sdr_noisy = si_sdr(mix.clean, mix.noisy);
    u.si_sdr_enh = si_sdr(mix.clean, enh);
    u.stoi_noisy = stoi(mix.clean, mix.noisy);
    u.stoi_enh = stoi(mix.clean, enh);
    s.rows.push_back(u);
  }
  if (!s.rows.empty()) {
    for (const auto& u : s.rows) {
      s.mean_si_sdr_noisy += u.si_sdr_noisy;
      s.mean_si_sdr_enh += u.si_sdr_enh;
      s.mean_stoi_noisy += u.stoi_noisy;
      s.mean_stoi_enh += u.stoi_enh;
    }
    const double n = static_cast<double>(s.rows.size());
    s.mean_si_sdr_noisy /= n;
    s.mean_si_sdr_enh /= n;
    s.mean_stoi_noisy /= n;
    s.mean_stoi_enh /= n;
  }
  return s;
}

inline const char* kMetricsHeader = "utt_id,snr_db,si_sdr_noisy,si_sdr_enh,stoi_noisy,stoi_enh";

inline std::string metrics_csv(const EvalSummary& s) {
  std::ostringstream os;
  os << kMetricsHeader << "\n";
  char buf[256];
  for (const auto& u : s.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.3f,%.6f,%.6f,%.6f,%.6f\n", u.utt_id.c_str(), u.snr_db,
                  u.si_sdr_noisy, u.si_sdr_enh, u.stoi_noisy, u.stoi_enh);
    os << buf;
  }
  return os.str();
}

}  // namespace rui
