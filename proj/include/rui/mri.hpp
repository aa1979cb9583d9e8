// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Multiple refinement iterator. With f_i = R_i(a, r_i) and prefix sums
// A_0 = none, A_1 = f_1, A_i = A_{i-1} + f_i (left to right):
//   r_1 = p,  r_i = p - A_{i-1}     (S-path)
//   output = p + A_N                 (A-path; p itself when N = 0)
// The ledger keeps every operand so both identities can be re-derived exactly.

#pragma once

#include <cstring>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "rui/pem.hpp"
#include "rui/uie.hpp"

namespace rui {

inline constexpr std::size_t kMaxRefinements = 8;

/// One refinement block R_i:
///   u = ReLU(conv3x3([r_i as T x 2 x F ; a]))
///   h = harmonic template of |r_i|
///   v = u * sigmoid(conv1x1([u ; h]))
///   f_i = conv3x3(v) with the output convolution starting at zero
template <typename T>
class RefinementBlock {
 public:
  RefinementBlock(compute::ParamStore<T>& s, const std::string& prefix,
                  std::shared_ptr<const CombPitchMatrix> comb, HarmonicConfig hcfg,
                  std::size_t channels)
      : comb_(std::move(comb)),
        hcfg_(hcfg),
        mix_(s, prefix + ".mix", channels + 2, channels, 3, 3, {1, 1}),
        gate_(s, prefix + ".gate", channels + 1, channels, 1, 1, {1, 0}),
        out_(s, prefix + ".out", channels, 2, 3, 3, {1, 1}, true) {}

  compute::Tensor<T> operator()(const compute::Tensor<T>& a, const compute::Tensor<T>& r) const {
    using namespace compute;
    const std::size_t frames = r.dim(0), bins = comb_->bins;
    auto u = relu(mix_(concat<T>({reshape(r, {frames, 2, bins}), a}, 1)));
    auto tmpl = harmonic_template(complex_abs(r), *comb_, hcfg_.temperature);
    auto h = reshape(scale(tmpl.harmonic, static_cast<T>(hcfg_.kmax)), {frames, 1, bins});
    auto v = mul(u, sigmoid(gate_(concat<T>({u, h}, 1))));
    return reshape(out_(v), {frames, 2 * bins});
  }

 private:
  std::shared_ptr<const CombPitchMatrix> comb_;
  HarmonicConfig hcfg_;
  ConvParams<T> mix_, gate_, out_;
};

/// Values of every flow in one refinement pass, row-major [T, 2F].
template <typename T>
struct RefinementLedger {
  std::size_t frames = 0, width = 0;
  std::vector<T> p;
  std::vector<std::vector<T>> f;
  std::vector<std::vector<T>> s_inputs;
  std::vector<T> output;

  std::size_t iterations() const { return f.size(); }
};

template <typename T>
struct Refinement {
  compute::Tensor<T> output;
  std::vector<compute::Tensor<T>> f;
  RefinementLedger<T> ledger;
};

/// Replaces R_i's output when set (i is 1-based); used to audit arbitrary flows.
template <typename T>
using RefinementHook =
    std::function<compute::Tensor<T>(std::size_t i, const compute::Tensor<T>& r_i)>;

template <typename T>
Refinement<T> refine(const compute::Tensor<T>& p, const compute::Tensor<T>& a,
                     const std::vector<RefinementBlock<T>>& blocks, std::size_t n,
                     const RefinementHook<T>& hook = {}) {
  using namespace compute;
  if (n > kMaxRefinements)
    throw ConfigError("mri.n_refinements = " + std::to_string(n) + " exceeds the limit of " +
                      std::to_string(kMaxRefinements));
  if (!hook && n > blocks.size())
    throw ConfigError("refine asked for " + std::to_string(n) + " iterations but only " +
                      std::to_string(blocks.size()) + " blocks exist");
  Refinement<T> out;
  auto& led = out.ledger;
  led.frames = p.dim(0);
  led.width = p.dim(1);
  led.p = p.value();
  Tensor<T> acc;
  for (std::size_t i = 1; i <= n; ++i) {
    Tensor<T> r = i == 1 ? p : sub(p, acc);
    Tensor<T> f = hook ? hook(i, r) : blocks[i - 1](a, r);
    if (f.shape() != p.shape())
      throw ShapeError("refinement " + std::to_string(i) + " produced " + to_string(f.shape()) +
                       ", expected " + to_string(p.shape()));
    acc = i == 1 ? f : add(acc, f);
    led.s_inputs.push_back(r.value());
    led.f.push_back(f.value());
    out.f.push_back(f);
  }
  out.output = n == 0 ? p : add(p, acc);
  led.output = out.output.value();
  return out;
}

struct AuditReport {
  bool s_path_ok = true;
  bool a_path_ok = true;
  /// 1-based i such that the records disagree with p - (f_1 + ... + f_i), or
  /// with p + (f_1 + ... + f_N) when only the A-path fails; 0 when clean.
  std::size_t failed_iteration = 0;
  std::string message;
  std::vector<double> f_energy;         // ||f_i||^2
  std::vector<double> residual_energy;  // ||p - (f_1 + ... + f_i)||^2

  bool passed() const { return s_path_ok && a_path_ok; }

  std::string summary() const {
    std::ostringstream os;
    os << "S-path identity: " << (s_path_ok ? "PASS" : "FAIL") << "\n";
    os << "A-path identity: " << (a_path_ok ? "PASS" : "FAIL") << "\n";
    if (!passed()) os << message << "\n";
    for (std::size_t i = 0; i < f_energy.size(); ++i)
      os << "iteration " << i + 1 << ": |f|^2 = " << f_energy[i]
         << "  |p - sum f|^2 = " << residual_energy[i] << "\n";
    return os.str();
  }
};

namespace detail {

template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
double energy(const std::vector<T>& v) {
  double e = 0.0;
  for (T x : v) e += static_cast<double>(x) * static_cast<double>(x);
  return e;
}

}  // namespace detail

/// Recomputes both identities in the refine order and compares bit patterns.
template <typename T>
AuditReport audit_ledger(const RefinementLedger<T>& led) {
  AuditReport rep;
  const std::size_t n = led.f.size(), len = led.p.size();
  if (led.s_inputs.size() != n) {
    rep.s_path_ok = false;
    rep.message = "ledger holds " + std::to_string(n) + " flows but " +
                  std::to_string(led.s_inputs.size()) + " S-path inputs";
    return rep;
  }
  std::vector<T> acc(len, T(0)), resid(len);
  for (std::size_t i = 0; i < n; ++i) {
    if (led.f[i].size() != len || led.s_inputs[i].size() != len) {
      rep.s_path_ok = false;
      rep.failed_iteration = i + 1;
      rep.message = "iteration " + std::to_string(i + 1) + " has a mis-sized record";
      return rep;
    }
    if (i == 0) {
      if (rep.s_path_ok && !detail::same_bits(led.s_inputs[0], led.p)) {
        rep.s_path_ok = false;
        rep.failed_iteration = 1;
        rep.message = "S-path input 1 differs from p";
      }
      acc = led.f[0];
    } else {
      for (std::size_t k = 0; k < len; ++k) resid[k] = led.p[k] - acc[k];
      if (rep.s_path_ok && !detail::same_bits(led.s_inputs[i], resid)) {
        rep.s_path_ok = false;
        rep.failed_iteration = i;
        rep.message = "S-path identity violated after iteration " + std::to_string(i);
      }
      for (std::size_t k = 0; k < len; ++k) acc[k] = acc[k] + led.f[i][k];
    }
    for (std::size_t k = 0; k < len; ++k) resid[k] = led.p[k] - acc[k];
    rep.f_energy.push_back(detail::energy(led.f[i]));
    rep.residual_energy.push_back(detail::energy(resid));
  }
  std::vector<T> expected = led.p;
  if (n > 0)
    for (std::size_t k = 0; k < len; ++k) expected[k] = led.p[k] + acc[k];
  if (!detail::same_bits(led.output, expected)) {
    rep.a_path_ok = false;
    if (rep.failed_iteration == 0) {
      rep.failed_iteration = n;
      rep.message = "A-path identity violated: output != p + sum of " + std::to_string(n) + " flows";
    }
  }
  return rep;
}

template <typename T>
void require_audit(const RefinementLedger<T>& led) {
  auto rep = audit_ledger(led);
  if (!rep.passed()) throw AuditError(rep.message);
}

}  // namespace rui
