// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rui/compute/tensor.hpp"

namespace rui::compute {

enum class Init {
  kFanInUniform,  // U(-sqrt(1/fan_in), +sqrt(1/fan_in))
  kZeros,
  kOnes,
};

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw. Identical on
/// every platform, unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Named trainable tensors, iterated in lexicographic name order.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    Tensor<T> tensor;
    Init init = Init::kZeros;
    std::size_t fan_in = 1;
  };

  Tensor<T> add(const std::string& name, Shape shape, Init init, std::size_t fan_in = 1) {
    if (entries_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
    Entry e;
    e.tensor = Tensor<T>::zeros(std::move(shape), true);
    e.init = init;
    e.fan_in = std::max<std::size_t>(fan_in, 1);
    if (init == Init::kOnes) std::fill(e.tensor.mutable_value().begin(), e.tensor.mutable_value().end(), T(1));
    auto it = entries_.emplace(name, std::move(e)).first;
    return it->second.tensor;
  }

  /// Registers an existing leaf as a parameter (values kept as-is).
  Tensor<T> adopt(const std::string& name, Tensor<T> tensor) {
    if (entries_.count(name)) throw ConfigError("parameter '" + name + "' registered twice");
    if (!tensor.requires_grad()) throw ConfigError("parameter '" + name + "' must require grad");
    Entry e;
    e.tensor = tensor;
    entries_.emplace(name, std::move(e));
    return tensor;
  }

  /// Each parameter draws from its own stream keyed by (seed, name), so a
  /// module's initial values do not depend on which other modules exist.
  /// Values are generated in double and rounded, so stores of different
  /// precision initialized with the same seed agree up to rounding.
  void initialize(std::uint64_t seed) {
    for (auto& [name, e] : entries_) {
      auto& v = e.tensor.mutable_value();
      switch (e.init) {
        case Init::kZeros: std::fill(v.begin(), v.end(), T(0)); break;
        case Init::kOnes: std::fill(v.begin(), v.end(), T(1)); break;
        case Init::kFanInUniform: {
          std::mt19937_64 rng(stream_seed(seed, name));
          const double bound = std::sqrt(1.0 / static_cast<double>(e.fan_in));
          for (auto& x : v) x = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * bound);
          break;
        }
      }
    }
  }

  /// FNV-1a over the name, mixed with the seed.
  static std::uint64_t stream_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h ^ (seed * 0x9E3779B97F4A7C15ull);
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor<T> get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second.tensor;
  }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& kv : entries_) out.push_back(kv.first);
    return out;
  }
  std::size_t size() const { return entries_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& kv : entries_) n += kv.second.tensor.numel();
    return n;
  }
  /// Parameters whose name starts with `prefix`.
  std::size_t parameter_count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_)
      if (name.rfind(prefix, 0) == 0) n += e.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& kv : entries_) kv.second.tensor.zero_grad();
  }

  /// Copies values from a store with identical names and shapes.
  template <typename U>
  void copy_values_from(const ParamStore<U>& other) {
    for (auto& [name, e] : entries_) {
      Tensor<U> src = other.get(name);
      if (src.shape() != e.tensor.shape())
        throw ShapeError("parameter '" + name + "' has shape " + to_string(src.shape()) +
                         ", expected " + to_string(e.tensor.shape()));
      auto& dst = e.tensor.mutable_value();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src.value()[i]);
    }
    if (other.size() != size()) throw ShapeError("parameter stores differ in size");
  }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace rui::compute
