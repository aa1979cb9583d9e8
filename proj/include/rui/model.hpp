// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// The full network: PEM -> p, harmonic attention on X -> a, N refinements.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rui/compute/signal.hpp"
#include "rui/config.hpp"
#include "rui/mri.hpp"
#include "rui/pem.hpp"
#include "rui/spectral.hpp"
#include "rui/uie.hpp"

namespace rui {

struct ModelConfig {
  PemConfig pem;
  HarmonicConfig uie;
  std::size_t n_refinements = 3;
  std::size_t channels = 14;
  std::size_t hop = 384;

  static ModelConfig from(const Config& c) {
    ModelConfig m;
    m.pem.kind = parse_pem_kind(c.str("pem.kind"));
    m.pem.crn_width = c.count("pem.crn_width");
    m.pem.crn_hidden = c.count("pem.crn_hidden");
    m.pem.mask_hidden = c.count("pem.mask_hidden");
    m.uie.pitch_min = c.real("uie.pitch_min");
    m.uie.pitch_max = c.real("uie.pitch_max");
    m.uie.pitch_bins = c.count("uie.pitch_bins");
    m.uie.kmax = c.count("uie.kmax");
    m.uie.temperature = c.real("uie.temperature");
    m.n_refinements = c.count("mri.n_refinements");
    m.channels = c.count("mri.channels");
    m.hop = c.count("stft.hop");
    m.validate();
    return m;
  }

  void validate() const {
    if (n_refinements > kMaxRefinements)
      throw ConfigError("mri.n_refinements must be in [0, " + std::to_string(kMaxRefinements) +
                        "], got " + std::to_string(n_refinements));
    if (channels == 0) throw ConfigError("mri.channels must be positive");
    if (pem.crn_width == 0 || pem.crn_hidden == 0 || pem.mask_hidden == 0)
      throw ConfigError("pem widths must be positive");
    if (!(uie.temperature > 0)) throw ConfigError("uie.temperature must be positive");
    if (hop == 0 || hop >= 512) throw ConfigError("stft.hop must be in (0, 512)");
  }

  StftConfig stft() const { return make_stft_config(hop); }
};

template <typename T>
struct ModelOutput {
  compute::Tensor<T> p;
  compute::Tensor<T> a;  // empty when there are no refinements
  Refinement<T> refinement;

  const compute::Tensor<T>& output() const { return refinement.output; }
};

template <typename T>
class RuiModel {
 public:
  explicit RuiModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    comb_ = std::make_shared<const CombPitchMatrix>(make_comb(cfg_.uie, cfg_.pem.bins));
    pem_ = make_pem(params_, cfg_.pem);
    if (cfg_.n_refinements > 0) {
      uie_ = std::make_unique<HarmonicAttention<T>>(params_, comb_, cfg_.uie, cfg_.channels);
      for (std::size_t i = 1; i <= cfg_.n_refinements; ++i)
        blocks_.emplace_back(params_, "mri.r" + std::to_string(i), comb_, cfg_.uie, cfg_.channels);
    }
  }

  RuiModel(const RuiModel&) = delete;
  RuiModel& operator=(const RuiModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  compute::ParamStore<T>& params() { return params_; }
  const compute::ParamStore<T>& params() const { return params_; }
  const Pem<T>& pem() const { return *pem_; }
  const CombPitchMatrix& comb() const { return *comb_; }
  const HarmonicAttention<T>* uie() const { return uie_.get(); }
  const std::vector<RefinementBlock<T>>& blocks() const { return blocks_; }

  void initialize(std::uint64_t seed) { params_.initialize(seed); }

  ModelOutput<T> forward(const compute::Tensor<T>& x, const RefinementHook<T>& hook = {}) const {
    ModelOutput<T> out;
    out.p = pem_->forward(x);
    if (cfg_.n_refinements > 0) out.a = uie_->forward(x);
    out.refinement = refine(out.p, out.a, blocks_, cfg_.n_refinements, hook);
    return out;
  }

  /// Enhances a waveform; the output has the input length.
  AudioClip enhance(const AudioClip& noisy) const {
    require_pipeline_rate(noisy);
    const auto stft_cfg = cfg_.stft();
    auto spec = stft<T>(noisy, stft_cfg);
    auto out = forward(compute::spectrum_tensor<T>(spec));
    return istft(compute::to_spectrum<T>(out.output()), stft_cfg, noisy.samples.size());
  }

 private:
  ModelConfig cfg_;
  compute::ParamStore<T> params_;
  std::shared_ptr<const CombPitchMatrix> comb_;
  std::unique_ptr<Pem<T>> pem_;
  std::unique_ptr<HarmonicAttention<T>> uie_;
  std::vector<RefinementBlock<T>> blocks_;
};

}  // namespace rui
