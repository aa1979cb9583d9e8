// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Layer-level differentiable operations: dense products, normalization,
// time-causal 2-D convolutions over (time, channel, frequency) blocks and a
// gated recurrent cell unrolled along time.

#pragma once

#include <Eigen/Core>

#include "rui/compute/tensor.hpp"

namespace rui::compute {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline void expect_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank)
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) + ", got " +
                     to_string(s));
}

}  // namespace detail

/// a [M, K] x b [K, N] -> [M, N].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank(a.shape(), 2, "matmul");
  detail::expect_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul inner dimension mismatch: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  std::vector<T> out(m * n);
  detail::MatMap<T>(out.data(), m, n).noalias() =
      detail::ConstMatMap<T>(a.value().data(), m, k) * detail::ConstMatMap<T>(b.value().data(), k, n);
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    detail::ConstMatMap<T> g(self.grad.data(), m, n);
    if (auto* ga = input_grad(self, 0))
      detail::MatMap<T>(ga->data(), m, k).noalias() +=
          g * detail::ConstMatMap<T>(self.inputs[1]->value.data(), k, n).transpose();
    if (auto* gb = input_grad(self, 1))
      detail::MatMap<T>(gb->data(), k, n).noalias() +=
          detail::ConstMatMap<T>(self.inputs[0]->value.data(), m, k).transpose() * g;
  });
}

/// Affine map over the last axis: x [N, D], weight [O, D], bias [O] -> [N, O].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::expect_rank(x.shape(), 2, "linear");
  const std::size_t n = x.dim(0), d = x.dim(1), o = weight.dim(0);
  if (weight.shape() != Shape{o, d} || bias.shape() != Shape{o})
    throw ShapeError("linear parameter shapes " + to_string(weight.shape()) + ", " +
                     to_string(bias.shape()) + " do not fit input " + to_string(x.shape()));
  std::vector<T> out(n * o);
  detail::MatMap<T> y(out.data(), n, o);
  y.noalias() = detail::ConstMatMap<T>(x.value().data(), n, d) *
                detail::ConstMatMap<T>(weight.value().data(), o, d).transpose();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < o; ++j) y(i, j) += bias.value()[j];
  return make_result<T>("linear", {n, o}, std::move(out), {x, weight, bias},
                        [n, d, o](Node<T>& self) {
                          detail::ConstMatMap<T> g(self.grad.data(), n, o);
                          if (auto* gx = input_grad(self, 0))
                            detail::MatMap<T>(gx->data(), n, d).noalias() +=
                                g * detail::ConstMatMap<T>(self.inputs[1]->value.data(), o, d);
                          if (auto* gw = input_grad(self, 1))
                            detail::MatMap<T>(gw->data(), o, d).noalias() +=
                                g.transpose() *
                                detail::ConstMatMap<T>(self.inputs[0]->value.data(), n, d);
                          if (auto* gb = input_grad(self, 2))
                            for (std::size_t i = 0; i < n; ++i)
                              for (std::size_t j = 0; j < o; ++j) (*gb)[j] += g(i, j);
                        });
}

/// Softmax along one axis.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  auto v = detail::axis_view(x.shape(), axis);
  const auto& xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.len * v.inner + i;
      T mx = xv[base];
      for (std::size_t a = 1; a < v.len; ++a) mx = std::max(mx, xv[base + a * v.inner]);
      T s = T(0);
      for (std::size_t a = 0; a < v.len; ++a) {
        T e = std::exp(xv[base + a * v.inner] - mx);
        out[base + a * v.inner] = e;
        s += e;
      }
      for (std::size_t a = 0; a < v.len; ++a) out[base + a * v.inner] /= s;
    }
  return make_result<T>("softmax", x.shape(), std::move(out), {x}, [v](Node<T>& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.len * v.inner + i;
        T dot = T(0);
        for (std::size_t a = 0; a < v.len; ++a) dot += g[base + a * v.inner] * y[base + a * v.inner];
        for (std::size_t a = 0; a < v.len; ++a) {
          const std::size_t k = base + a * v.inner;
          (*gx)[k] += y[k] * (g[k] - dot);
        }
      }
  });
}

/// Layer normalization over the trailing numel(gamma) elements of each row.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  const std::size_t d = gamma.numel();
  if (d == 0 || x.numel() % d != 0 || beta.numel() != d)
    throw ShapeError("layer_norm parameters of size " + std::to_string(d) +
                     " do not divide input " + to_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  const auto& xv = x.value();
  std::vector<T> out(xv.size()), xhat(xv.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      T h = (row[j] - mu) * inv_std[r];
      xhat[r * d + j] = h;
      out[r * d + j] = gamma.value()[j] * h + beta.value()[j];
    }
  }
  return make_result<T>(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const auto& g = self.grad;
        const auto& gam = self.inputs[1]->value;
        auto* gx = input_grad(self, 0);
        auto* gg = input_grad(self, 1);
        auto* gb = input_grad(self, 2);
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T m1 = T(0), m2 = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t k = r * d + j;
            if (gg) (*gg)[j] += g[k] * xhat[k];
            if (gb) (*gb)[j] += g[k];
            dxhat[j] = g[k] * gam[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xhat[k];
          }
          if (!gx) continue;
          m1 /= static_cast<T>(d);
          m2 /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t k = r * d + j;
            (*gx)[k] += inv_std[r] * (dxhat[j] - m1 - xhat[k] * m2);
          }
        }
      });
}

/// Per-bin magnitude of a T x 2F complex block ([real | imag] per row) -> T x F.
template <typename T>
Tensor<T> complex_abs(const Tensor<T>& x) {
  detail::expect_rank(x.shape(), 2, "complex_abs");
  const std::size_t rows = x.dim(0), f = x.dim(1) / 2;
  if (x.dim(1) % 2 != 0) throw ShapeError("complex_abs needs an even last dimension");
  const auto& xv = x.value();
  std::vector<T> out(rows * f);
  for (std::size_t t = 0; t < rows; ++t)
    for (std::size_t k = 0; k < f; ++k) {
      T re = xv[t * 2 * f + k], im = xv[t * 2 * f + f + k];
      out[t * f + k] = std::sqrt(re * re + im * im);
    }
  return make_result<T>("complex_abs", {rows, f}, std::move(out), {x}, [rows, f](Node<T>& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xv = self.inputs[0]->value;
    for (std::size_t t = 0; t < rows; ++t)
      for (std::size_t k = 0; k < f; ++k) {
        T m = self.value[t * f + k];
        if (m == T(0)) continue;
        T g = self.grad[t * f + k] / m;
        (*gx)[t * 2 * f + k] += g * xv[t * 2 * f + k];
        (*gx)[t * 2 * f + f + k] += g * xv[t * 2 * f + f + k];
      }
  });
}

// ---------------------------------------------------------------------------
// Convolutions over [T, C, F] blocks. Time is causal: output frame t only sees
// input frames <= t. Frequency uses a stride and symmetric zero padding.

struct ConvOptions {
  std::size_t freq_stride = 1;
  std::size_t freq_pad = 0;
};

inline std::size_t conv_out_bins(std::size_t fin, std::size_t kf, ConvOptions o) {
  if (fin + 2 * o.freq_pad < kf) throw ShapeError("convolution kernel wider than padded input");
  return (fin + 2 * o.freq_pad - kf) / o.freq_stride + 1;
}

inline std::size_t conv_transpose_out_bins(std::size_t fin, std::size_t kf, ConvOptions o) {
  if ((fin - 1) * o.freq_stride + kf < 2 * o.freq_pad)
    throw ShapeError("transposed convolution padding too large");
  return (fin - 1) * o.freq_stride + kf - 2 * o.freq_pad;
}

namespace detail {

struct ConvGeom {
  std::size_t frames, cin, fin, cout, kt, kf, fout;
  ConvOptions opt;
  std::size_t k() const { return cin * kt * kf; }
};

/// cols[(c, kt, kf), (t, fo)] = x[t - (KT-1) + kt, c, fo*s + kf - pad], zero outside.
template <typename T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  const std::size_t width = g.frames * g.fout;
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kf; ++b) {
        T* row = cols + ((c * g.kt + a) * g.kf + b) * width;
        for (std::size_t t = 0; t < g.frames; ++t) {
          T* dst = row + t * g.fout;
          const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t + a) -
                                       static_cast<std::ptrdiff_t>(g.kt - 1);
          if (src_t < 0) {
            std::fill_n(dst, g.fout, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(src_t) * g.cin + c) * g.fin;
          for (std::size_t fo = 0; fo < g.fout; ++fo) {
            const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * g.opt.freq_stride + b) -
                                      static_cast<std::ptrdiff_t>(g.opt.freq_pad);
            dst[fo] = (fi < 0 || fi >= static_cast<std::ptrdiff_t>(g.fin)) ? T(0) : src[fi];
          }
        }
      }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* dx) {
  const std::size_t width = g.frames * g.fout;
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kf; ++b) {
        const T* row = cols + ((c * g.kt + a) * g.kf + b) * width;
        for (std::size_t t = 0; t < g.frames; ++t) {
          const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t + a) -
                                       static_cast<std::ptrdiff_t>(g.kt - 1);
          if (src_t < 0) continue;
          T* dst = dx + (static_cast<std::size_t>(src_t) * g.cin + c) * g.fin;
          const T* src = row + t * g.fout;
          for (std::size_t fo = 0; fo < g.fout; ++fo) {
            const std::ptrdiff_t fi = static_cast<std::ptrdiff_t>(fo * g.opt.freq_stride + b) -
                                      static_cast<std::ptrdiff_t>(g.opt.freq_pad);
            if (fi >= 0 && fi < static_cast<std::ptrdiff_t>(g.fin)) dst[fi] += src[fo];
          }
        }
      }
}

}  // namespace detail

/// x [T, Cin, Fin], weight [Cout, Cin, KT, KF], bias [Cout] -> [T, Cout, Fout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvOptions opt = {}) {
  detail::expect_rank(x.shape(), 3, "conv2d input");
  detail::expect_rank(weight.shape(), 4, "conv2d weight");
  detail::ConvGeom g{x.dim(0), x.dim(1), x.dim(2), weight.dim(0), weight.dim(2), weight.dim(3), 0, opt};
  if (weight.dim(1) != g.cin || bias.shape() != Shape{g.cout})
    throw ShapeError("conv2d weight " + to_string(weight.shape()) + " does not fit input " +
                     to_string(x.shape()));
  if (opt.freq_stride == 0) throw ShapeError("conv2d stride must be positive");
  g.fout = conv_out_bins(g.fin, g.kf, opt);
  const std::size_t width = g.frames * g.fout;
  std::vector<T> cols(g.k() * width);
  detail::im2col(g, x.value().data(), cols.data());
  detail::RowMat<T> y = detail::ConstMatMap<T>(weight.value().data(), g.cout, g.k()) *
                        detail::ConstMatMap<T>(cols.data(), g.k(), width);
  std::vector<T> out(width * g.cout);
  for (std::size_t t = 0; t < g.frames; ++t)
    for (std::size_t o = 0; o < g.cout; ++o) {
      const T b = bias.value()[o];
      for (std::size_t fo = 0; fo < g.fout; ++fo)
        out[(t * g.cout + o) * g.fout + fo] = y(o, t * g.fout + fo) + b;
    }
  return make_result<T>(
      "conv2d", {g.frames, g.cout, g.fout}, std::move(out), {x, weight, bias},
      [g, width](Node<T>& self) {
        detail::RowMat<T> gy(g.cout, width);
        for (std::size_t t = 0; t < g.frames; ++t)
          for (std::size_t o = 0; o < g.cout; ++o)
            for (std::size_t fo = 0; fo < g.fout; ++fo)
              gy(o, t * g.fout + fo) = self.grad[(t * g.cout + o) * g.fout + fo];
        if (auto* gb = input_grad(self, 2))
          for (std::size_t o = 0; o < g.cout; ++o) (*gb)[o] += gy.row(o).sum();
        auto* gw = input_grad(self, 1);
        auto* gx = input_grad(self, 0);
        if (gw) {
          std::vector<T> cols(g.k() * width);
          detail::im2col(g, self.inputs[0]->value.data(), cols.data());
          detail::MatMap<T>(gw->data(), g.cout, g.k()).noalias() +=
              gy * detail::ConstMatMap<T>(cols.data(), g.k(), width).transpose();
        }
        if (gx) {
          detail::RowMat<T> dcols =
              detail::ConstMatMap<T>(self.inputs[1]->value.data(), g.cout, g.k()).transpose() * gy;
          detail::col2im_add(g, dcols.data(), gx->data());
        }
      });
}

/// Frequency-upsampling transposed convolution, causal in time:
/// out[t, o, fi*s - pad + kf] += w[c, o, kt, kf] * x[t - kt, c, fi].
/// x [T, Cin, Fin], weight [Cin, Cout, KT, KF], bias [Cout] -> [T, Cout, Fout].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           ConvOptions opt = {}) {
  detail::expect_rank(x.shape(), 3, "conv_transpose2d input");
  detail::expect_rank(weight.shape(), 4, "conv_transpose2d weight");
  const std::size_t frames = x.dim(0), cin = x.dim(1), fin = x.dim(2);
  const std::size_t cout = weight.dim(1), kt = weight.dim(2), kf = weight.dim(3);
  if (weight.dim(0) != cin || bias.shape() != Shape{cout})
    throw ShapeError("conv_transpose2d weight " + to_string(weight.shape()) +
                     " does not fit input " + to_string(x.shape()));
  if (opt.freq_stride == 0) throw ShapeError("conv_transpose2d stride must be positive");
  const std::size_t fout = conv_transpose_out_bins(fin, kf, opt);
  const std::size_t width = frames * fin;
  const std::size_t rows = cout * kt * kf;

  // xm[c, (t, fi)] = x[t, c, fi]
  auto channel_major = [=](const std::vector<T>& xv) {
    detail::RowMat<T> xm(cin, width);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t f = 0; f < fin; ++f) xm(c, t * fin + f) = xv[(t * cin + c) * fin + f];
    return xm;
  };
  // Visits (z row, z col, out flat index) for every in-range contribution.
  auto for_each_tap = [=](auto&& fn) {
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t a = 0; a < kt; ++a)
        for (std::size_t b = 0; b < kf; ++b) {
          const std::size_t row = (o * kt + a) * kf + b;
          for (std::size_t t = 0; t + a < frames; ++t)
            for (std::size_t f = 0; f < fin; ++f) {
              const std::ptrdiff_t fo = static_cast<std::ptrdiff_t>(f * opt.freq_stride + b) -
                                        static_cast<std::ptrdiff_t>(opt.freq_pad);
              if (fo < 0 || fo >= static_cast<std::ptrdiff_t>(fout)) continue;
              fn(row, t * fin + f, ((t + a) * cout + o) * fout + static_cast<std::size_t>(fo));
            }
        }
  };

  detail::RowMat<T> xm = channel_major(x.value());
  detail::RowMat<T> z = detail::ConstMatMap<T>(weight.value().data(), cin, rows).transpose() * xm;
  std::vector<T> out(frames * cout * fout);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t o = 0; o < cout; ++o)
      std::fill_n(out.begin() + (t * cout + o) * fout, fout, bias.value()[o]);
  for_each_tap([&](std::size_t r, std::size_t col, std::size_t idx) { out[idx] += z(r, col); });

  return make_result<T>(
      "conv_transpose2d", {frames, cout, fout}, std::move(out), {x, weight, bias},
      [=](Node<T>& self) {
        if (auto* gb = input_grad(self, 2))
          for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t o = 0; o < cout; ++o)
              for (std::size_t f = 0; f < fout; ++f)
                (*gb)[o] += self.grad[(t * cout + o) * fout + f];
        auto* gw = input_grad(self, 1);
        auto* gx = input_grad(self, 0);
        if (!gw && !gx) return;
        detail::RowMat<T> dz = detail::RowMat<T>::Zero(rows, width);
        for_each_tap([&](std::size_t r, std::size_t col, std::size_t idx) {
          dz(r, col) = self.grad[idx];
        });
        if (gw) {
          detail::RowMat<T> xm = channel_major(self.inputs[0]->value);
          detail::MatMap<T>(gw->data(), cin, rows).noalias() += xm * dz.transpose();
        }
        if (gx) {
          detail::RowMat<T> dxm =
              detail::ConstMatMap<T>(self.inputs[1]->value.data(), cin, rows) * dz;
          for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t c = 0; c < cin; ++c)
              for (std::size_t f = 0; f < fin; ++f)
                (*gx)[(t * cin + c) * fin + f] += dxm(c, t * fin + f);
        }
      });
}

// ---------------------------------------------------------------------------
// Gated recurrent cell (update/reset form) applied along the first axis:
//   r_t = sigmoid(W_ir x_t + b_ir + W_hr h_{t-1} + b_hr)
//   z_t = sigmoid(W_iz x_t + b_iz + W_hz h_{t-1} + b_hz)
//   n_t = tanh(W_in x_t + b_in + r_t * (W_hn h_{t-1} + b_hn))
//   h_t = (1 - z_t) * n_t + z_t * h_{t-1},   h_0 = 0
// Weights are stacked in (r, z, n) order: w_ih [3H, D], w_hh [3H, H].

template <typename T>
Tensor<T> gru(const Tensor<T>& x, const Tensor<T>& w_ih, const Tensor<T>& w_hh,
              const Tensor<T>& b_ih, const Tensor<T>& b_hh) {
  detail::expect_rank(x.shape(), 2, "gru input");
  const std::size_t steps = x.dim(0), d = x.dim(1), h = w_hh.dim(1);
  if (w_ih.shape() != Shape{3 * h, d} || w_hh.shape() != Shape{3 * h, h} ||
      b_ih.shape() != Shape{3 * h} || b_hh.shape() != Shape{3 * h})
    throw ShapeError("gru parameter shapes do not fit input " + to_string(x.shape()));

  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  detail::ConstMatMap<T> whh(w_hh.value().data(), 3 * h, h);
  Eigen::Map<const Vec> bhh(b_hh.value().data(), 3 * h);
  // Input projections for every step at once.
  detail::RowMat<T> gi = detail::ConstMatMap<T>(x.value().data(), steps, d) *
                         detail::ConstMatMap<T>(w_ih.value().data(), 3 * h, d).transpose();
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < 3 * h; ++j) gi(t, j) += b_ih.value()[j];

  // Per-step cache: r, z, n and the hidden-side candidate term W_hn h + b_hn.
  auto cache = std::make_shared<std::vector<T>>(steps * 4 * h);
  std::vector<T> out(steps * h);
  Vec prev = Vec::Zero(h);
  for (std::size_t t = 0; t < steps; ++t) {
    Vec gh = whh * prev + bhh;
    T* c = cache->data() + t * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      T r = T(1) / (T(1) + std::exp(-(gi(t, j) + gh(j))));
      T z = T(1) / (T(1) + std::exp(-(gi(t, h + j) + gh(h + j))));
      T n = std::tanh(gi(t, 2 * h + j) + r * gh(2 * h + j));
      c[j] = r;
      c[h + j] = z;
      c[2 * h + j] = n;
      c[3 * h + j] = gh(2 * h + j);
      out[t * h + j] = (T(1) - z) * n + z * prev(j);
    }
    for (std::size_t j = 0; j < h; ++j) prev(j) = out[t * h + j];
  }

  return make_result<T>(
      "gru", {steps, h}, std::move(out), {x, w_ih, w_hh, b_ih, b_hh},
      [steps, d, h, cache](Node<T>& self) {
        const auto& hv = self.value;
        detail::ConstMatMap<T> whh(self.inputs[2]->value.data(), 3 * h, h);
        detail::RowMat<T> dgi(steps, 3 * h);
        detail::RowMat<T> dwhh = detail::RowMat<T>::Zero(3 * h, h);
        Vec dbhh = Vec::Zero(3 * h);
        Vec carry = Vec::Zero(h);
        Vec dgh(3 * h);
        for (std::size_t t = steps; t-- > 0;) {
          const T* c = cache->data() + t * 4 * h;
          for (std::size_t j = 0; j < h; ++j) {
            const T r = c[j], z = c[h + j], n = c[2 * h + j], ghn = c[3 * h + j];
            const T hp = t > 0 ? hv[(t - 1) * h + j] : T(0);
            const T dh = self.grad[t * h + j] + carry(j);
            const T dn = dh * (T(1) - z);
            const T dz = dh * (hp - n);
            const T dan = dn * (T(1) - n * n);
            const T dr = dan * ghn;
            const T dar = dr * r * (T(1) - r);
            const T daz = dz * z * (T(1) - z);
            dgi(t, j) = dar;
            dgi(t, h + j) = daz;
            dgi(t, 2 * h + j) = dan;
            dgh(j) = dar;
            dgh(h + j) = daz;
            dgh(2 * h + j) = dan * r;
            carry(j) = dh * z;
          }
          carry.noalias() += whh.transpose() * dgh;
          dbhh += dgh;
          if (t > 0) {
            Eigen::Map<const Vec> hp(hv.data() + (t - 1) * h, h);
            dwhh.noalias() += dgh * hp.transpose();
          }
        }
        if (auto* gx = input_grad(self, 0))
          detail::MatMap<T>(gx->data(), steps, d).noalias() +=
              dgi * detail::ConstMatMap<T>(self.inputs[1]->value.data(), 3 * h, d);
        if (auto* gw = input_grad(self, 1))
          detail::MatMap<T>(gw->data(), 3 * h, d).noalias() +=
              dgi.transpose() * detail::ConstMatMap<T>(self.inputs[0]->value.data(), steps, d);
        if (auto* gw = input_grad(self, 2)) detail::MatMap<T>(gw->data(), 3 * h, h) += dwhh;
        if (auto* gb = input_grad(self, 3))
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t j = 0; j < 3 * h; ++j) (*gb)[j] += dgi(t, j);
        if (auto* gb = input_grad(self, 4))
          for (std::size_t j = 0; j < 3 * h; ++j) (*gb)[j] += dbhh(j);
      });
}

}  // namespace rui::compute
