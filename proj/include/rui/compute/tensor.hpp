// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal reverse-mode differentiation over dense row-major tensors.
//
// A Tensor is a handle to a graph node holding its value, an optional
// gradient buffer and a closure that propagates the node's gradient to its
// inputs. Nodes are immutable once created by a forward operation. Graphs are
// confined to one thread; backward visits nodes in a fixed reverse topological
// order so accumulation is deterministic.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "rui/error.hpp"

namespace rui::compute {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
  os << ')';
  return os.str();
}

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  std::string op = "leaf";

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor leaf(Shape shape, std::vector<T> values, bool requires_grad) {
    if (compute::numel(shape) != values.size())
      throw ShapeError("leaf shape " + to_string(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor constant(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), false);
  }
  static Tensor variable(Shape shape, std::vector<T> values) {
    return leaf(std::move(shape), std::move(values), true);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<T> v(compute::numel(shape), T(0));
    return leaf(std::move(shape), std::move(v), requires_grad);
  }
  static Tensor scalar(T v) { return constant({1}, {v}); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }
  const std::vector<T>& value() const { return node_->value; }
  /// Leaf values only; mutating an interior node invalidates its graph.
  std::vector<T>& mutable_value() { return node_->value; }
  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& mutable_grad() { return node_->ensure_grad(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }
  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
  }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the result node of a forward operation. The backward closure and
/// the input links are kept only if some input requires a gradient.
template <typename T>
Tensor<T> make_result(std::string op, Shape shape, std::vector<T> value,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward) {
  if (numel(shape) != value.size())
    throw ShapeError("operation '" + op + "' produced " + std::to_string(value.size()) +
                     " values for shape " + to_string(shape));
  for (const T& v : value)
    if (!std::isfinite(v)) throw NonFiniteError(op);
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = std::move(op);
  for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
  if (n->requires_grad) {
    n->inputs.reserve(inputs.size());
    for (const auto& in : inputs) n->inputs.push_back(in.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

/// Gradient buffer of input i, or nullptr if it takes no gradient.
template <typename T>
std::vector<T>* input_grad(Node<T>& self, std::size_t i) {
  Node<T>& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

/// Reverse-mode sweep from a scalar root (seed 1) or with an explicit seed.
template <typename T>
void backward(const Tensor<T>& root, const std::vector<T>* seed = nullptr) {
  if (!root.requires_grad()) return;
  if (seed == nullptr && root.numel() != 1)
    throw ShapeError("backward() without seed needs a scalar root, got " +
                     to_string(root.shape()));
  // Iterative post-order DFS; inputs are visited in declaration order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  auto& g = root.node()->ensure_grad();
  if (seed) {
    if (seed->size() != g.size()) throw ShapeError("backward seed size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*seed)[i];
  } else {
    g[0] += T(1);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic with same-rank broadcasting (dims equal or 1).

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": rank mismatch " + to_string(a) + " vs " + to_string(b));
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) out[i] = a[i];
    else if (a[i] == 1) out[i] = b[i];
    else
      throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                       to_string(b));
  }
  return out;
}

/// Flat source index into `src` for every element of `out` under broadcasting.
inline std::vector<std::size_t> broadcast_index(const Shape& src, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> stride(rank, 0);
  std::size_t s = 1;
  for (std::size_t i = rank; i-- > 0;) {
    stride[i] = src[i] == 1 ? 0 : s;
    s *= src[i];
  }
  std::vector<std::size_t> idx(numel(out));
  std::vector<std::size_t> counter(rank, 0);
  std::size_t cur = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    idx[k] = cur;
    for (std::size_t d = rank; d-- > 0;) {
      cur += stride[d];
      if (++counter[d] < out[d]) break;
      cur -= stride[d] * out[d];
      counter[d] = 0;
    }
  }
  return idx;
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, BinOp kind, const char* name) {
  const bool same = a.shape() == b.shape();
  Shape out_shape = same ? a.shape() : broadcast_shape(a.shape(), b.shape(), name);
  const std::size_t n = numel(out_shape);
  std::vector<std::size_t> ia, ib;
  if (!same) {
    ia = broadcast_index(a.shape(), out_shape);
    ib = broadcast_index(b.shape(), out_shape);
  }
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<T> out(n);
  auto fwd = [kind](T x, T y) {
    switch (kind) {
      case BinOp::kAdd: return x + y;
      case BinOp::kSub: return x - y;
      case BinOp::kMul: return x * y;
      default: return x / y;
    }
  };
  if (same) {
    for (std::size_t k = 0; k < n; ++k) out[k] = fwd(av[k], bv[k]);
  } else {
    for (std::size_t k = 0; k < n; ++k) out[k] = fwd(av[ia[k]], bv[ib[k]]);
  }
  return make_result<T>(
      name, out_shape, std::move(out), {a, b},
      [kind, ia = std::move(ia), ib = std::move(ib)](Node<T>& self) {
        const auto& g = self.grad;
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        auto* ga = input_grad(self, 0);
        auto* gb = input_grad(self, 1);
        const bool same = ia.empty();
        for (std::size_t k = 0; k < g.size(); ++k) {
          const std::size_t i = same ? k : ia[k];
          const std::size_t j = same ? k : ib[k];
          switch (kind) {
            case BinOp::kAdd:
              if (ga) (*ga)[i] += g[k];
              if (gb) (*gb)[j] += g[k];
              break;
            case BinOp::kSub:
              if (ga) (*ga)[i] += g[k];
              if (gb) (*gb)[j] -= g[k];
              break;
            case BinOp::kMul:
              if (ga) (*ga)[i] += g[k] * bv[j];
              if (gb) (*gb)[j] += g[k] * av[i];
              break;
            case BinOp::kDiv:
              if (ga) (*ga)[i] += g[k] / bv[j];
              if (gb) (*gb)[j] -= g[k] * av[i] / (bv[j] * bv[j]);
              break;
          }
        }
      });
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* name, Fwd fwd, Deriv deriv) {
  const auto& xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t k = 0; k < xv.size(); ++k) out[k] = fwd(xv[k]);
  return make_result<T>(name, x.shape(), std::move(out), {x}, [deriv](Node<T>& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    const auto& xv = self.inputs[0]->value;
    for (std::size_t k = 0; k < self.grad.size(); ++k)
      (*gx)[k] += self.grad[k] * deriv(xv[k], self.value[k]);
  });
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::kAdd, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::kSub, "sub");
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::kMul, "mul");
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary(a, b, detail::BinOp::kDiv, "div");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  return detail::unary(x, "scale", [c](T v) { return v * c; }, [c](T, T) { return c; });
}
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return detail::unary(x, "add_scalar", [c](T v) { return v + c; }, [](T, T) { return T(1); });
}
template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return scale(x, T(-1));
}
template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return detail::unary(x, "square", [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary(
      x, "sigmoid",
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary(x, "tanh", [](T v) { return std::tanh(v); },
                       [](T, T y) { return T(1) - y * y; });
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(x, "relu", [](T v) { return v > 0 ? v : T(0); },
                       [](T v, T) { return v > 0 ? T(1) : T(0); });
}
template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return detail::unary(x, "log", [](T v) { return std::log(v); },
                       [](T v, T) { return T(1) / v; });
}
template <typename T>
Tensor<T> log10(const Tensor<T>& x) {
  const T k = T(1) / std::log(T(10));
  return detail::unary(x, "log10", [](T v) { return std::log10(v); },
                       [k](T v, T) { return k / v; });
}
template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return detail::unary(x, "exp", [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}
template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return detail::unary(x, "sqrt", [](T v) { return std::sqrt(v); },
                       [](T, T y) { return y > 0 ? T(0.5) / y : T(0); });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = T(0);
  for (T v : x.value()) s += v;
  return make_result<T>("sum", {1}, {s}, {x}, [](Node<T>& self) {
    if (auto* gx = input_grad(self, 0))
      for (auto& g : *gx) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  const T inv = T(1) / static_cast<T>(x.numel());
  T s = T(0);
  for (T v : x.value()) s += v;
  return make_result<T>("mean", {1}, {s * inv}, {x}, [inv](Node<T>& self) {
    if (auto* gx = input_grad(self, 0))
      for (auto& g : *gx) g += self.grad[0] * inv;
  });
}

namespace detail {
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};
inline AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}
}  // namespace detail

/// Sum over one axis; the reduced axis is kept with extent 1.
template <typename T>
Tensor<T> sum_axis(const Tensor<T>& x, std::size_t axis) {
  auto v = detail::axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  std::vector<T> out(v.outer * v.inner, T(0));
  const auto& xv = x.value();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t a = 0; a < v.len; ++a)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += xv[(o * v.len + a) * v.inner + i];
  return make_result<T>("sum_axis", out_shape, std::move(out), {x}, [v](Node<T>& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t a = 0; a < v.len; ++a)
        for (std::size_t i = 0; i < v.inner; ++i)
          (*gx)[(o * v.len + a) * v.inner + i] += self.grad[o * v.inner + i];
  });
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& x, std::size_t axis) {
  return scale(sum_axis(x, axis), T(1) / static_cast<T>(x.dim(axis)));
}

// ---------------------------------------------------------------------------
// Shape manipulation.

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  return make_result<T>("reshape", std::move(shape), x.value(), {x}, [](Node<T>& self) {
    if (auto* gx = input_grad(self, 0))
      for (std::size_t k = 0; k < self.grad.size(); ++k) (*gx)[k] += self.grad[k];
  });
}

/// Swaps two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::size_t a0, std::size_t a1) {
  const Shape& in = x.shape();
  const std::size_t rank = in.size();
  if (a0 >= rank || a1 >= rank) throw ShapeError("transpose axis out of range");
  Shape out_shape = in;
  std::swap(out_shape[a0], out_shape[a1]);
  // Source stride of each output axis.
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  std::vector<std::size_t> src_stride = in_stride;
  std::swap(src_stride[a0], src_stride[a1]);
  std::vector<std::size_t> index(x.numel());
  std::vector<std::size_t> counter(rank, 0);
  std::size_t cur = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    index[k] = cur;
    for (std::size_t d = rank; d-- > 0;) {
      cur += src_stride[d];
      if (++counter[d] < out_shape[d]) break;
      cur -= src_stride[d] * out_shape[d];
      counter[d] = 0;
    }
  }
  std::vector<T> out(index.size());
  for (std::size_t k = 0; k < index.size(); ++k) out[k] = x.value()[index[k]];
  return make_result<T>("transpose", out_shape, std::move(out), {x},
                        [index = std::move(index)](Node<T>& self) {
                          if (auto* gx = input_grad(self, 0))
                            for (std::size_t k = 0; k < index.size(); ++k)
                              (*gx)[index[k]] += self.grad[k];
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Shape out_shape = parts[0].shape();
  if (axis >= out_shape.size()) throw ShapeError("concat axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != out_shape.size()) throw ShapeError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != parts[0].shape()[i])
        throw ShapeError("concat shape mismatch: " + to_string(s) + " vs " +
                         to_string(parts[0].shape()));
    out_shape[axis] += s[axis];
  }
  auto v = detail::axis_view(out_shape, axis);
  std::vector<std::size_t> offsets;
  std::vector<T> out(numel(out_shape));
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = p.dim(axis);
    const auto& pv = p.value();
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(pv.begin() + o * len * v.inner, len * v.inner,
                  out.begin() + (o * v.len + off) * v.inner);
    off += len;
  }
  return make_result<T>("concat", out_shape, std::move(out),
                        std::vector<Tensor<T>>(parts.begin(), parts.end()),
                        [v, offsets](Node<T>& self) {
                          for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                            auto* gp = input_grad(self, k);
                            if (!gp) continue;
                            const std::size_t len = gp->size() / (v.outer * v.inner);
                            for (std::size_t o = 0; o < v.outer; ++o)
                              for (std::size_t j = 0; j < len * v.inner; ++j)
                                (*gp)[o * len * v.inner + j] +=
                                    self.grad[(o * v.len + offsets[k]) * v.inner + j];
                          }
                        });
}

/// Elements [begin, end) along one axis.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  auto v = detail::axis_view(x.shape(), axis);
  if (begin > end || end > v.len)
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for axis of length " + std::to_string(v.len));
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  std::vector<T> out(numel(out_shape));
  const auto& xv = x.value();
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(xv.begin() + (o * v.len + begin) * v.inner, len * v.inner,
                out.begin() + o * len * v.inner);
  return make_result<T>("slice", out_shape, std::move(out), {x}, [v, begin, len](Node<T>& self) {
    auto* gx = input_grad(self, 0);
    if (!gx) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t j = 0; j < len * v.inner; ++j)
        (*gx)[(o * v.len + begin) * v.inner + j] += self.grad[o * len * v.inner + j];
  });
}

}  // namespace rui::compute
