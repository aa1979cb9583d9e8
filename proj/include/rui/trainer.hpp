// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Training loop: Adam on the combined objective, plateau learning-rate decay,
// global-norm clipping and best-validation checkpointing.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "rui/compute/checkpoint.hpp"
#include "rui/dataset.hpp"
#include "rui/model.hpp"
#include "rui/objective.hpp"

namespace rui {

struct TrainConfig {
  double lr0 = 1e-3;
  double decay = 0.75;
  std::size_t patience = 3;
  std::size_t batch = 4;
  std::size_t epochs_max = 100;
  std::uint64_t seed = 1;
  LossWeights weights;
  std::size_t bands = 24;
  double grad_clip = 5.0;
  std::size_t segment_samples = kSegmentSamples;
  ModelConfig model;

  static TrainConfig from(const Config& c) {
    TrainConfig t;
    t.lr0 = c.real("lr0");
    t.decay = c.real("decay");
    t.patience = c.count("patience");
    t.batch = c.count("batch");
    t.epochs_max = c.count("epochs_max");
    t.seed = static_cast<std::uint64_t>(c.count("seed"));
    t.weights.si_snr = c.real("w_sisnr");
    t.weights.perceptual = c.real("w_perc");
    t.bands = c.count("perc.bands");
    t.grad_clip = c.real("grad_clip");
    t.segment_samples = c.count("segment_samples");
    t.model = ModelConfig::from(c);
    t.validate();
    return t;
  }

  void validate() const {
    if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
    if (!(decay > 0 && decay < 1)) throw ConfigError("decay must lie in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (!(grad_clip > 0)) throw ConfigError("grad_clip must be positive");
    if (segment_samples < 512) throw ConfigError("segment_samples must cover one STFT window");
    model.validate();
  }
};

struct ScheduleState {
  double lr = 1e-3;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stagnant = 0;
  std::size_t decays = 0;
};

inline ScheduleState initial_schedule(const TrainConfig& cfg) {
  ScheduleState s;
  s.lr = cfg.lr0;
  return s;
}

/// Improvement resets the stagnation counter; `patience` consecutive
/// non-improving epochs multiply the rate by `decay`.
inline ScheduleState lr_step(ScheduleState s, double val_loss, const TrainConfig& cfg) {
  if (!std::isfinite(val_loss)) throw NonFiniteError("validation loss");
  if (val_loss < s.best_val) {
    s.best_val = val_loss;
    s.stagnant = 0;
    return s;
  }
  if (++s.stagnant >= cfg.patience) {
    s.stagnant = 0;
    ++s.decays;
    s.lr = cfg.lr0 * std::pow(cfg.decay, static_cast<double>(s.decays));
  }
  return s;
}

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename T>
class Adam {
 public:
  explicit Adam(compute::ParamStore<T>& params) : params_(params) {
    for (const auto& [name, e] : params.entries()) {
      m_.emplace_back(e.tensor.numel(), 0.0);
      v_.emplace_back(e.tensor.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    std::size_t k = 0;
    for (auto& [name, e] : params_.entries()) {
      compute::Tensor<T> p = e.tensor;
      const auto& g = p.grad();
      auto& w = p.mutable_value();
      auto& m = m_[k];
      auto& v = v_[k];
      ++k;
      if (g.empty()) continue;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
        v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
        const double upd = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        w[i] = static_cast<T>(static_cast<double>(w[i]) - upd);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  compute::ParamStore<T>& params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
};

/// Scales all gradients so their joint L2 norm is at most `max_norm`; returns the norm before.
template <typename T>
double clip_grad_norm(compute::ParamStore<T>& params, double max_norm) {
  double total = 0.0;
  for (const auto& [name, e] : params.entries())
    for (T g : e.tensor.grad()) total += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(total);
  if (!std::isfinite(norm)) throw NonFiniteError("gradient norm");
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& [name, e] : params.entries()) {
      compute::Tensor<T> p = e.tensor;
      if (p.grad().empty()) continue;
      for (auto& g : p.mutable_grad()) g *= s;
    }
  }
  return norm;
}

/// A materialized segment prepared for the graph.
template <typename T>
struct Example {
  MixSpec spec;
  AudioClip noisy, clean;
  compute::Tensor<T> x;          // noisy spectrum [T, 2F]
  compute::Tensor<T> ref_spec;   // clean spectrum [T, 2F]
  compute::Tensor<T> ref_wave;   // clean samples over the frame-covered span
};

/// Samples covered by the analysis frames of a `len`-sample signal.
inline std::size_t covered_length(std::size_t len, const StftConfig& cfg) {
  return (cfg.frames_for(len) - 1) * cfg.hop + cfg.window_len;
}

template <typename T>
Example<T> make_example(const AudioClip& noisy, const AudioClip& clean, const StftConfig& cfg) {
  Example<T> ex;
  ex.noisy = noisy;
  ex.clean = clean;
  ex.x = compute::spectrum_tensor<T>(stft<T>(noisy, cfg));
  ex.ref_spec = compute::spectrum_tensor<T>(stft<T>(clean, cfg));
  const std::size_t n = covered_length(clean.samples.size(), cfg);
  ex.ref_wave = compute::Tensor<T>::constant(
      {n}, std::vector<T>(clean.samples.begin(), clean.samples.begin() + static_cast<long>(n)));
  return ex;
}

template <typename T>
std::vector<Example<T>> load_examples(const Manifest& m, const std::vector<MixSpec>& rows,
                                      MixtureSource& src, const StftConfig& cfg) {
  MixtureSource::check_files(m, rows);
  std::vector<Example<T>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto mix = src.materialize(m, r);
    out.push_back(make_example<T>(mix.noisy, mix.clean, cfg));
    out.back().spec = r;
  }
  return out;
}

template <typename T>
LossBreakdown<T> example_loss(const RuiModel<T>& model, const Example<T>& ex, LossWeights w,
                              std::size_t bands) {
  auto out = model.forward(ex.x);
  auto wave = compute::istft(out.output(), model.config().stft(), ex.ref_wave.numel());
  return combined_loss(ex.ref_wave, wave, ex.ref_spec, out.output(), w, bands);
}

template <typename T>
double mean_loss(const RuiModel<T>& model, const std::vector<Example<T>>& set, LossWeights w,
                 std::size_t bands) {
  if (set.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : set) s += static_cast<double>(example_loss(model, ex, w, bands).total.item());
  return s / static_cast<double>(set.size());
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;

  std::string line() const {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.3f", epoch, train_loss, val_loss, lr,
                  wall_seconds);
    return buf;
  }
};

inline const char* kTrainLogHeader = "epoch,train_loss,val_loss,lr,wall_seconds";

struct TrainOptions {
  std::filesystem::path out_dir;                    // receives best.ckpt and train_log.csv
  compute::ConfigSnapshot config_snapshot;          // stored in the checkpoint header
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const std::string&)> log;      // progress messages
  /// Stops early once the learning rate has decayed this many times (0 = never).
  std::size_t max_decays = 0;
  /// Stops early when this returns true after an epoch.
  std::function<bool(const EpochRecord&)> stop_when;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path log_path;
};

/// Trains `model` (already initialized) on the examples. Batches are drawn
/// from a per-epoch shuffle seeded by (seed, epoch); each epoch ends with a
/// validation pass that drives the schedule and the checkpoint.
template <typename T>
TrainResult train(RuiModel<T>& model, const TrainConfig& cfg, const std::vector<Example<T>>& train_set,
                  const std::vector<Example<T>>& val_set, const TrainOptions& opt) {
  cfg.validate();
  if (train_set.empty()) throw InventoryError("training split is empty");
  if (val_set.empty()) throw InventoryError("validation split is empty");
  std::filesystem::create_directories(opt.out_dir);
  TrainResult res;
  res.checkpoint = opt.out_dir / "best.ckpt";
  res.log_path = opt.out_dir / "train_log.csv";
  const bool fresh = !std::filesystem::exists(res.log_path);
  std::ofstream log(res.log_path, std::ios::app);
  if (!log) throw IoError("cannot open " + res.log_path.string());
  if (fresh) log << kTrainLogHeader << "\n";

  auto& params = model.params();
  Adam<T> adam(params);
  ScheduleState sched = initial_schedule(cfg);
  std::vector<std::size_t> order(train_set.size());
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(cfg.seed * 1000003ull + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t end = std::min(order.size(), b + cfg.batch);
      const T inv = T(1) / static_cast<T>(end - b);
      params.zero_grad();
      for (std::size_t k = b; k < end; ++k) {
        auto loss = example_loss(model, train_set[order[k]], cfg.weights, cfg.bands);
        const double v = static_cast<double>(loss.total.item());
        if (!std::isfinite(v)) throw NonFiniteError("training loss");
        train_sum += v;
        compute::backward(compute::scale(loss.total, inv));
      }
      clip_grad_norm(params, cfg.grad_clip);
      adam.step(sched.lr);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(order.size());
    rec.val_loss = mean_loss(model, val_set, cfg.weights, cfg.bands);
    rec.lr = sched.lr;
    if (!std::isfinite(rec.val_loss)) throw NonFiniteError("validation loss");
    if (rec.val_loss < res.best_val) {
      res.best_val = rec.val_loss;
      res.best_epoch = epoch;
      compute::save_checkpoint(res.checkpoint, params, opt.config_snapshot);
    }
    sched = lr_step(sched, rec.val_loss, cfg);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << rec.line() << "\n" << std::flush;
    res.epochs.push_back(rec);
    if (opt.on_epoch) opt.on_epoch(rec);
    if (opt.log) opt.log("epoch " + rec.line());
    if (opt.max_decays && sched.decays >= opt.max_decays) break;
    if (opt.stop_when && opt.stop_when(rec)) break;
  }
  return res;
}

}  // namespace rui
