// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rui/compute/params.hpp"

namespace rui::compute {

struct GradCheckOptions {
  double eps = 1e-4;
  double tol = 1e-4;
  /// Coordinates sampled per parameter (all of them if the tensor is smaller).
  std::size_t coords = 32;
  std::uint64_t seed = 0;
  /// Gradient magnitudes below this are compared in absolute terms.
  double min_scale = 1e-6;
  /// A coordinate that fails at eps is retried at eps/10, eps/100, ... this
  /// many times; a ReLU kink inside the stencil then no longer decides the outcome.
  std::size_t retries = 2;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
  }
  const GradCheckEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (!e.passed) out.push_back(e.name);
    return out;
  }
  std::string summary() const {
    std::ostringstream os;
    for (const auto& e : entries)
      os << (e.passed ? "ok   " : "FAIL ") << e.name << " worst[" << e.worst_index
         << "] analytic=" << e.analytic << " numeric=" << e.numeric << " rel=" << e.rel_error
         << " (" << e.checked << " coords)\n";
    return os.str();
  }
};

/// Compares analytic gradients of a scalar computation against central finite
/// differences on a seeded subset of coordinates of every parameter.
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                                  ParamStore<double>& params, GradCheckOptions opt = {}) {
  params.zero_grad();
  Tensor<double> loss = f();
  if (loss.numel() != 1) throw ShapeError("grad_check needs a scalar computation");
  backward(loss);

  GradCheckReport report;
  report.tol = opt.tol;
  std::uint64_t salt = 0;
  for (const auto& [name, entry] : params.entries()) {
    Tensor<double> p = entry.tensor;
    const std::size_t n = p.numel();
    std::vector<double> analytic = p.grad();
    if (analytic.size() != n) analytic.assign(n, 0.0);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (n > opt.coords) {
      std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ull + (++salt));
      for (std::size_t i = 0; i < opt.coords; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(opt.coords);
      std::sort(idx.begin(), idx.end());
    }

    GradCheckEntry e;
    e.name = name;
    e.checked = idx.size();
    e.rel_error = -1.0;
    auto& values = p.mutable_value();
    for (std::size_t i : idx) {
      const double orig = values[i];
      const double a = analytic[i];
      double numeric = 0.0, rel = 0.0, step = opt.eps;
      for (std::size_t attempt = 0; attempt <= opt.retries; ++attempt, step *= 0.1) {
        values[i] = orig + step;
        const double up = f().item();
        values[i] = orig - step;
        const double down = f().item();
        values[i] = orig;
        const double n = (up - down) / (2.0 * step);
        const double r = std::abs(a - n) / std::max({std::abs(a), std::abs(n), opt.min_scale});
        if (attempt == 0 || r < rel) rel = r, numeric = n;
        if (rel <= opt.tol) break;
      }
      if (rel > e.rel_error) {
        e.rel_error = rel;
        e.worst_index = i;
        e.analytic = a;
        e.numeric = numeric;
      }
    }
    if (e.rel_error < 0) e.rel_error = 0;
    e.passed = e.rel_error <= opt.tol;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace rui::compute
