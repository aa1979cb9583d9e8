// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Noisy-mixture synthesis and CSV manifests.
//
// Manifest columns: clean_path,noise_path,snr_db,noise_offset,split,seed
// Paths are relative to the manifest's directory. Each row describes one
// fixed-length segment; source files shorter than the segment are looped.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rui/audio.hpp"

namespace rui {

inline constexpr std::size_t kSegmentSamples = 64000;

struct MixResult {
  AudioClip noisy;
  AudioClip clean;   // reference, scaled together with `noisy`
  double noise_gain = 1.0;
  double peak_scale = 1.0;
};

inline double energy(std::span<const float> x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * static_cast<double>(v);
  return e;
}

/// noisy = clean + g noise with 10 log10(|clean|^2 / |g noise|^2) = snr_db; if
/// the peak exceeds 0.99 both noisy and clean are scaled by 0.99 / peak.
inline MixResult mix_at_snr(const AudioClip& clean, const AudioClip& noise, double snr_db) {
  if (clean.samples.size() != noise.samples.size())
    throw ShapeError("mix_at_snr: clean has " + std::to_string(clean.samples.size()) +
                     " samples, noise " + std::to_string(noise.samples.size()));
  const std::size_t n = clean.samples.size();
  const double ec = energy(clean.samples), en = energy(noise.samples);
  const double floor = 1e-12 * static_cast<double>(std::max<std::size_t>(n, 1));  // RMS 1e-6
  if (n == 0 || ec <= floor) throw EnergyError("mix_at_snr: clean signal is silent");
  if (en <= floor) throw EnergyError("mix_at_snr: noise signal is silent");
  MixResult r;
  r.noise_gain = std::sqrt(ec / (en * std::pow(10.0, snr_db / 10.0)));
  std::vector<double> mix(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mix[i] = static_cast<double>(clean.samples[i]) + r.noise_gain * static_cast<double>(noise.samples[i]);
    peak = std::max(peak, std::abs(mix[i]));
  }
  r.peak_scale = peak > 0.99 ? 0.99 / peak : 1.0;
  r.noisy.sample_rate_hz = r.clean.sample_rate_hz = clean.sample_rate_hz;
  r.noisy.samples.resize(n);
  r.clean.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.noisy.samples[i] = static_cast<float>(mix[i] * r.peak_scale);
    r.clean.samples[i] = static_cast<float>(static_cast<double>(clean.samples[i]) * r.peak_scale);
  }
  return r;
}

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split '" + s + "'");
}

struct MixSpec {
  std::string clean_path;  // relative to the manifest directory
  std::string noise_path;
  double snr_db = 0.0;
  std::size_t noise_offset = 0;
  Split split = Split::kTrain;
  std::uint32_t seed = 0;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<MixSpec> rows;

  std::vector<MixSpec> split(Split s) const {
    std::vector<MixSpec> out;
    for (const auto& r : rows)
      if (r.split == s) out.push_back(r);
    return out;
  }
  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

inline const char* kManifestHeader = "clean_path,noise_path,snr_db,noise_offset,split,seed";

inline std::string format_manifest(const std::vector<MixSpec>& rows) {
  std::ostringstream os;
  os << kManifestHeader << "\n";
  char snr[32];
  for (const auto& r : rows) {
    std::snprintf(snr, sizeof(snr), "%.3f", r.snr_db);
    os << r.clean_path << "," << r.noise_path << "," << snr << "," << r.noise_offset << ","
       << to_string(r.split) << "," << r.seed << "\n";
  }
  return os.str();
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<MixSpec>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << format_manifest(rows);
  if (!out) throw IoError("write failed: " + path.string());
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader)
    throw FormatError(path.string() + ": expected header '" + kManifestHeader + "'");
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    MixSpec r;
    try {
      r.clean_path = f[0];
      r.noise_path = f[1];
      r.snr_db = std::stod(f[2]);
      r.noise_offset = std::stoull(f[3]);
      r.split = parse_split(f[4]);
      r.seed = static_cast<std::uint32_t>(std::stoul(f[5]));
    } catch (const std::logic_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

struct ManifestOptions {
  double target_seconds = 7200.0;
  double snr_lo = -5.0;
  double snr_hi = 20.0;
  std::uint64_t seed = 1;
  std::size_t segment_samples = kSegmentSamples;
  bool test_only = false;  // every row goes to the test split
};

namespace detail {

inline std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw InventoryError("not a directory: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  auto rel = std::filesystem::relative(std::filesystem::absolute(p), std::filesystem::absolute(base));
  auto s = rel.generic_string();
  if (s.find(',') != std::string::npos) throw FormatError("path contains a comma: " + s);
  return s;
}

}  // namespace detail

/// Rows until the duration reaches the target. Outside test-only mode clean
/// files are partitioned 4:1 into train and val pools and every fifth row is
/// a val row, so row counts follow the same ratio and the pools never share a
/// file. Each row draws its SNR uniformly and a noise file and offset.
inline std::vector<MixSpec> build_manifest(const std::filesystem::path& clean_dir,
                                           const std::filesystem::path& noise_dir,
                                           const std::filesystem::path& manifest_path,
                                           const ManifestOptions& opt) {
  if (!(opt.snr_lo <= opt.snr_hi)) throw ConfigError("SNR range is empty");
  if (opt.snr_lo < -5.0 || opt.snr_hi > 30.0) throw ConfigError("SNR range must lie in [-5, 30] dB");
  if (!opt.test_only && opt.snr_hi > 20.0)
    throw ConfigError("training SNR draws must lie in [-5, 20] dB");
  const auto clean = detail::list_wavs(clean_dir);
  const auto noise = detail::list_wavs(noise_dir);
  if (clean.empty()) throw InventoryError("no WAV files in " + clean_dir.string());
  if (noise.empty()) throw InventoryError("no WAV files in " + noise_dir.string());
  if (!opt.test_only && clean.size() < 2)
    throw InventoryError("a train/val split needs at least 2 clean files in " + clean_dir.string());

  std::vector<std::size_t> noise_len;
  for (const auto& p : noise) noise_len.push_back(load_wav(p).samples.size());

  std::mt19937_64 rng(opt.seed);
  std::vector<std::filesystem::path> train_pool, val_pool;
  if (opt.test_only) {
    val_pool = clean;
  } else {
    auto shuffled = clean;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::size_t n_val = std::max<std::size_t>(1, (shuffled.size() + 2) / 5);
    n_val = std::min(n_val, shuffled.size() - 1);
    val_pool.assign(shuffled.begin(), shuffled.begin() + static_cast<long>(n_val));
    train_pool.assign(shuffled.begin() + static_cast<long>(n_val), shuffled.end());
    std::sort(val_pool.begin(), val_pool.end());
    std::sort(train_pool.begin(), train_pool.end());
  }

  const double seg_seconds = static_cast<double>(opt.segment_samples) / kSampleRate;
  const auto n_rows = static_cast<std::size_t>(std::ceil(opt.target_seconds / seg_seconds - 1e-9));
  const auto base = manifest_path.parent_path().empty() ? std::filesystem::path(".")
                                                        : manifest_path.parent_path();
  std::uniform_real_distribution<double> snr(opt.snr_lo, opt.snr_hi);
  std::vector<MixSpec> rows;
  std::size_t n_train = 0, n_val = 0;
  for (std::size_t i = 0; i < n_rows; ++i) {
    MixSpec r;
    const std::filesystem::path* c;
    if (opt.test_only) {
      r.split = Split::kTest;
      c = &val_pool[i % val_pool.size()];
    } else if (i % 5 == 4) {
      r.split = Split::kVal;
      c = &val_pool[n_val++ % val_pool.size()];
    } else {
      r.split = Split::kTrain;
      c = &train_pool[n_train++ % train_pool.size()];
    }
    const std::size_t k = static_cast<std::size_t>(rng() % noise.size());
    r.clean_path = detail::relative_to(*c, base);
    r.noise_path = detail::relative_to(noise[k], base);
    r.snr_db = std::clamp(std::round(snr(rng) * 1000.0) / 1000.0, opt.snr_lo, opt.snr_hi);
    r.noise_offset = noise_len[k] ? static_cast<std::size_t>(rng() % noise_len[k]) : 0;
    r.seed = static_cast<std::uint32_t>(rng());
    rows.push_back(std::move(r));
  }
  write_manifest(manifest_path, rows);
  return rows;
}

/// Loops `src` from `offset` to fill `len` samples.
inline AudioClip loop_crop(const AudioClip& src, std::size_t offset, std::size_t len) {
  if (src.samples.empty()) throw EnergyError("cannot crop an empty clip");
  AudioClip out;
  out.sample_rate_hz = src.sample_rate_hz;
  out.samples.resize(len);
  const std::size_t n = src.samples.size();
  for (std::size_t i = 0; i < len; ++i) out.samples[i] = src.samples[(offset + i) % n];
  return out;
}

/// Clean offsets come from the row seed: splitmix64(seed) mod length.
inline std::size_t clean_offset(std::uint32_t seed, std::size_t len) {
  std::uint64_t z = static_cast<std::uint64_t>(seed) + 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return len ? static_cast<std::size_t>(z % len) : 0;
}

struct Mixture {
  MixSpec spec;
  AudioClip noisy;
  AudioClip clean;        // peak-scaled reference
  AudioClip clean_raw;    // segment before mixing
  AudioClip noise_raw;    // noise segment before the gain
  double noise_gain = 1.0;
  double peak_scale = 1.0;

  /// SNR re-measured from the unscaled segments and the applied gain.
  double measured_snr_db() const {
    const double en = energy(noise_raw.samples) * noise_gain * noise_gain;
    return 10.0 * std::log10(energy(clean_raw.samples) / en);
  }
};

/// Loads source files once and materializes manifest rows.
class MixtureSource {
 public:
  explicit MixtureSource(std::size_t segment_samples = kSegmentSamples)
      : segment_(segment_samples) {}

  Mixture materialize(const Manifest& m, const MixSpec& r) {
    Mixture out;
    out.spec = r;
    const AudioClip& c = load(m.resolve(r.clean_path));
    const AudioClip& n = load(m.resolve(r.noise_path));
    out.clean_raw = loop_crop(c, clean_offset(r.seed, c.samples.size()), segment_);
    out.noise_raw = loop_crop(n, r.noise_offset, segment_);
    auto mix = mix_at_snr(out.clean_raw, out.noise_raw, r.snr_db);
    out.noisy = std::move(mix.noisy);
    out.clean = std::move(mix.clean);
    out.noise_gain = mix.noise_gain;
    out.peak_scale = mix.peak_scale;
    return out;
  }

  /// Fails with every missing path listed.
  static void check_files(const Manifest& m, const std::vector<MixSpec>& rows) {
    std::vector<std::string> missing;
    for (const auto& r : rows)
      for (const auto* p : {&r.clean_path, &r.noise_path})
        if (!std::filesystem::exists(m.resolve(*p)) &&
            std::find(missing.begin(), missing.end(), *p) == missing.end())
          missing.push_back(*p);
    if (missing.empty()) return;
    std::string msg = "missing files:";
    for (const auto& p : missing) msg += " " + p;
    throw InventoryError(msg);
  }

  std::size_t segment_samples() const { return segment_; }

 private:
  const AudioClip& load(const std::filesystem::path& p) {
    auto key = p.lexically_normal().string();
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto clip = load_wav(p);
    require_pipeline_rate(clip);
    return cache_.emplace(key, std::move(clip)).first->second;
  }

  std::size_t segment_;
  std::map<std::string, AudioClip> cache_;
};

}  // namespace rui
