// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "rui/error.hpp"

namespace rui {

/// One-sided real FFT of a fixed size backed by FFTW (double precision).
/// Plans are created once per size and shared; execution is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0 || n % 2 != 0) throw ConfigError("FFT size must be even and positive");
    std::lock_guard<std::mutex> lock(mutex());
    auto& cache = plans();
    auto it = cache.find(n);
    if (it == cache.end()) {
      std::vector<double> r(n);
      std::vector<fftw_complex> c(n / 2 + 1);
      Plans p;
      unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
      p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), r.data(), c.data(), flags);
      p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), c.data(), r.data(),
                                       flags | FFTW_DESTROY_INPUT);
      it = cache.emplace(n, p).first;
    }
    plan_ = it->second;
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }

  /// out[k] = sum_n in[n] e^{-2 pi i k n / N}, k in [0, N/2].
  void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    std::vector<double> buf(in.begin(), in.end());
    fftw_execute_dft_r2c(plan_.forward, buf.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
  }

  /// Unnormalized inverse: out[n] = sum over the full Hermitian spectrum.
  /// Imaginary parts of the DC and Nyquist bins are ignored.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
    std::vector<std::complex<double>> buf(in.begin(), in.end());
    fftw_execute_dft_c2r(plan_.inverse, reinterpret_cast<fftw_complex*>(buf.data()),
                         out.data());
  }

 private:
  struct Plans {
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;
  };
  static std::mutex& mutex() {
    static std::mutex m;
    return m;
  }
  static std::map<std::size_t, Plans>& plans() {
    static std::map<std::size_t, Plans> cache;
    return cache;
  }

  std::size_t n_;
  Plans plan_;
};

}  // namespace rui
