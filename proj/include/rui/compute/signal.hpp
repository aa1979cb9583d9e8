// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "rui/compute/tensor.hpp"
#include "rui/spectral.hpp"

namespace rui::compute {

/// Spectrum value as a graph constant of shape [T, 2F].
template <typename T, typename Real>
Tensor<T> spectrum_tensor(const BasicSpectrum<Real>& spec, bool requires_grad = false) {
  std::vector<T> v(spec.data.begin(), spec.data.end());
  return Tensor<T>::leaf({spec.frames, 2 * spec.bins}, std::move(v), requires_grad);
}

template <typename Real, typename T>
BasicSpectrum<Real> to_spectrum(const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) % 2 != 0)
    throw ShapeError("expected a [T, 2F] spectrum tensor, got " + to_string(x.shape()));
  BasicSpectrum<Real> s;
  s.frames = x.dim(0);
  s.bins = x.dim(1) / 2;
  s.data.assign(x.value().begin(), x.value().end());
  return s;
}

/// Differentiable weighted overlap-add synthesis: [T, 2F] -> [out_len].
/// The adjoint of the one-sided inverse DFT is (c_k / N) times the forward DFT
/// of the upstream gradient, c_k = 1 at DC and Nyquist and 2 elsewhere.
template <typename T>
Tensor<T> istft(const Tensor<T>& spec, const StftConfig& cfg, std::size_t out_len) {
  check_config(cfg);
  if (spec.rank() != 2 || spec.dim(1) != 2 * cfg.bins())
    throw ShapeError("istft expects [T, " + std::to_string(2 * cfg.bins()) + "], got " +
                     to_string(spec.shape()));
  BasicSpectrum<T> s = to_spectrum<T>(spec);
  std::vector<double> y = istft_samples(s, cfg, out_len);
  std::vector<T> out(y.begin(), y.end());
  const std::size_t frames = s.frames;
  return make_result<T>("istft", {out_len}, std::move(out), {spec}, [cfg, frames, out_len](Node<T>& self) {
    auto* gs = input_grad(self, 0);
    if (!gs) return;
    const std::size_t bins = cfg.bins();
    const std::size_t n = cfg.fft_size;
    std::vector<double> inv = wola_inverse_norm(cfg, frames, out_len);
    RealFft fft(n);
    std::vector<double> frame(n, 0.0);
    std::vector<std::complex<double>> g(bins);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < cfg.window_len; ++k) {
        const std::size_t i = t * cfg.hop + k;
        frame[k] = i < out_len ? cfg.window[k] * self.grad[i] * inv[i] : 0.0;
      }
      fft.forward(frame, g);
      for (std::size_t f = 0; f < bins; ++f) {
        const bool edge = f == 0 || f == bins - 1;
        const double c = (edge ? 1.0 : 2.0) / static_cast<double>(n);
        (*gs)[t * 2 * bins + f] += static_cast<T>(c * g[f].real());
        if (!edge) (*gs)[t * 2 * bins + bins + f] += static_cast<T>(c * g[f].imag());
      }
    }
  });
}

}  // namespace rui::compute
