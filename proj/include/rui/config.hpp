// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Flat `key = value` configuration with a closed schema. Unknown keys are
// rejected both in files and in overrides.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "rui/error.hpp"

namespace rui {

inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d = {
      {"stft.hop", "384"},
      {"pem.kind", "crn"},
      {"pem.crn_width", "8"},
      {"pem.crn_hidden", "64"},
      {"pem.mask_hidden", "128"},
      {"uie.pitch_min", "50"},
      {"uie.pitch_max", "500"},
      {"uie.pitch_bins", "64"},
      {"uie.kmax", "16"},
      {"uie.temperature", "0.1"},
      {"mri.n_refinements", "3"},
      {"mri.channels", "14"},
      {"w_sisnr", "1.0"},
      {"w_perc", "0.2"},
      {"perc.bands", "24"},
      {"lr0", "0.001"},
      {"decay", "0.75"},
      {"patience", "3"},
      {"batch", "4"},
      {"epochs_max", "100"},
      {"seed", "1"},
      {"grad_clip", "5.0"},
      {"segment_samples", "64000"},
      {"prepare.target_seconds", "7200"},
      {"prepare.snr_lo", "-5"},
      {"prepare.snr_hi", "20"},
      {"prepare.test_only", "0"},
  };
  return d;
}

class Config {
 public:
  Config() : values_(config_defaults()) {}

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c;
    c.merge_text(ss.str(), path.string());
    return c;
  }

  void merge_text(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::string_view sv = trim(line);
      if (sv.empty()) continue;
      auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      set(std::string(trim(sv.substr(0, eq))), std::string(trim(sv.substr(eq + 1))));
    }
  }

  /// Accepts "key=value" as given on the command line.
  void set_override(const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }

  void set(const std::string& key, const std::string& value) {
    if (!config_defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
      throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
    return v;
  }

  long long integer(const std::string& key) const {
    const std::string& s = str(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("config key '" + key + "' expects an integer, got '" + s + "'");
    return v;
  }

  std::size_t count(const std::string& key) const {
    long long v = integer(key);
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  std::string dump() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace rui
