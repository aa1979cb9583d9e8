// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end. `dispatch` returns 0 on success, 1 on usage errors
// and 2 on runtime errors; logs go to the error stream.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rui/compute/checkpoint.hpp"
#include "rui/config.hpp"
#include "rui/dataset.hpp"
#include "rui/evaluate.hpp"
#include "rui/model.hpp"
#include "rui/trainer.hpp"

namespace rui::cli {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string in, out, manifest, checkpoint;
  std::optional<long long> seed;
};

inline std::size_t worker_threads() {
  const char* env = std::getenv("RUI_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("RUI_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(v);
}

/// Defaults, then the checkpoint's stored config, then --config, then --set, then --seed.
inline Config effective_config(const Options& o, const compute::ConfigSnapshot* stored = nullptr) {
  Config c;
  if (stored)
    for (const auto& [k, v] : *stored) c.set(k, v);
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw IoError("cannot open config " + o.config);
    std::stringstream ss;
    ss << in.rdbuf();
    c.merge_text(ss.str(), o.config);
  }
  for (const auto& kv : o.overrides) c.set_override(kv);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  return c;
}

inline void report_config(const std::string& cmd, const Config& c, std::ostream& err) {
  err << "rui " << cmd << " effective config:\n";
  std::istringstream in(c.dump());
  for (std::string line; std::getline(in, line);) err << "  " << line << "\n";
}

inline void require(const std::string& value, const char* flag, const char* cmd) {
  if (value.empty()) throw CLI::ValidationError(std::string(cmd) + " requires " + flag);
}

struct LoadedModel {
  Config config;
  std::unique_ptr<RuiModel<float>> model;
};

inline LoadedModel load_model(const Options& o) {
  auto header = compute::read_checkpoint_header(o.checkpoint);
  LoadedModel lm;
  lm.config = effective_config(o, &header.config);
  lm.model = std::make_unique<RuiModel<float>>(ModelConfig::from(lm.config));
  compute::load_checkpoint(o.checkpoint, lm.model->params());
  return lm;
}

inline AudioClip load_input(const fs::path& p) {
  auto clip = load_wav(p);
  require_pipeline_rate(clip);
  return clip;
}

inline int run_prepare(const Options& o, std::ostream& err) {
  require(o.in, "--in", "prepare");
  const std::string manifest = !o.manifest.empty() ? o.manifest : o.out;
  require(manifest, "--manifest", "prepare");
  Config c = effective_config(o);
  report_config("prepare", c, err);
  ManifestOptions mo;
  mo.target_seconds = c.real("prepare.target_seconds");
  mo.snr_lo = c.real("prepare.snr_lo");
  mo.snr_hi = c.real("prepare.snr_hi");
  mo.seed = static_cast<std::uint64_t>(c.count("seed"));
  mo.segment_samples = c.count("segment_samples");
  mo.test_only = c.count("prepare.test_only") != 0;
  const fs::path root(o.in);
  if (!fs::path(manifest).parent_path().empty()) fs::create_directories(fs::path(manifest).parent_path());
  auto rows = build_manifest(root / "clean", root / "noise", manifest, mo);
  err << "wrote " << rows.size() << " rows to " << manifest << "\n";
  return 0;
}

inline int run_train(const Options& o, std::ostream& err) {
  require(o.manifest, "--manifest", "train");
  require(o.out, "--out", "train");
  Config c = effective_config(o);
  report_config("train", c, err);
  TrainConfig tc = TrainConfig::from(c);
  const Manifest m = read_manifest(o.manifest);
  MixtureSource src(tc.segment_samples);
  const auto stft_cfg = tc.model.stft();
  auto train_set = load_examples<float>(m, m.split(Split::kTrain), src, stft_cfg);
  auto val_set = load_examples<float>(m, m.split(Split::kVal), src, stft_cfg);
  RuiModel<float> model(tc.model);
  model.initialize(tc.seed);
  err << "model parameters: " << model.params().parameter_count() << "\n";
  TrainOptions opt;
  opt.out_dir = o.out;
  opt.config_snapshot = c.values();
  opt.log = [&err](const std::string& s) { err << s << "\n"; };
  auto res = train(model, tc, train_set, val_set, opt);
  err << "best val loss " << res.best_val << " at epoch " << res.best_epoch << " -> "
      << res.checkpoint.string() << "\n";
  return 0;
}

inline int run_enhance(const Options& o, std::ostream& err) {
  require(o.in, "--in", "enhance");
  require(o.out, "--out", "enhance");
  require(o.checkpoint, "--checkpoint", "enhance");
  auto lm = load_model(o);
  report_config("enhance", lm.config, err);
  const fs::path in(o.in), out(o.out);
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    for (const auto& e : fs::directory_iterator(in))
      if (e.is_regular_file() && e.path().extension() == ".wav")
        jobs.emplace_back(e.path(), out / (e.path().stem().string() + ".enh.wav"));
  } else if (in.extension() == ".csv") {
    fs::create_directories(out);
    const Manifest m = read_manifest(in);
    MixtureSource src(lm.config.count("segment_samples"));
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      auto mix = src.materialize(m, m.rows[i]);
      const fs::path noisy = out / (utt_id(m.rows[i], i) + ".wav");
      save_wav(mix.noisy, noisy);
      jobs.emplace_back(noisy, out / (utt_id(m.rows[i], i) + ".enh.wav"));
    }
  } else {
    jobs.emplace_back(in, out);
  }
  std::sort(jobs.begin(), jobs.end());
  const std::size_t threads = std::min(worker_threads(), std::max<std::size_t>(jobs.size(), 1));
  std::mutex mu;
  std::exception_ptr failure;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t k;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= jobs.size() || failure) return;
        k = next++;
      }
      try {
        AudioClip y = lm.model->enhance(load_input(jobs[k].first));
        if (const double g = limit_to_full_scale(y); g != 1.0) {
          std::lock_guard<std::mutex> lock(mu);
          err << jobs[k].second.string() << ": output scaled by " << g << " to stay within full scale\n";
        }
        save_wav(y, jobs[k].second);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  err << "enhanced " << jobs.size() << " file(s)\n";
  return 0;
}

inline int run_eval(const Options& o, std::ostream& err) {
  require(o.manifest, "--manifest", "eval");
  require(o.checkpoint, "--checkpoint", "eval");
  require(o.out, "--out", "eval");
  auto lm = load_model(o);
  report_config("eval", lm.config, err);
  const Manifest m = read_manifest(o.manifest);
  auto rows = m.split(Split::kTest);
  if (rows.empty()) rows = m.split(Split::kVal);
  MixtureSource src(lm.config.count("segment_samples"));
  auto summary = evaluate(m, rows, src, [&](const Mixture& mix) { return lm.model->enhance(mix.noisy); });
  std::ofstream out(o.out, std::ios::trunc);
  if (!out) throw IoError("cannot write " + o.out);
  out << metrics_csv(summary);
  err << "rows " << summary.rows.size() << "  SI-SDR noisy " << summary.mean_si_sdr_noisy
      << " dB, enhanced " << summary.mean_si_sdr_enh << " dB  STOI noisy " << summary.mean_stoi_noisy
      << ", enhanced " << summary.mean_stoi_enh << "  PESQ n/a\n";
  return 0;
}

inline int run_viz(const Options& o, std::ostream& err) {
  require(o.in, "--in", "viz");
  require(o.out, "--out", "viz");
  require(o.checkpoint, "--checkpoint", "viz");
  auto lm = load_model(o);
  report_config("viz", lm.config, err);
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const auto cfg = lm.model->config().stft();
  auto spec = stft<float>(load_input(o.in), cfg);
  auto res = lm.model->forward(compute::spectrum_tensor<float>(spec));
  export_spectrogram(spec, dir / "noisy.pgm");
  export_spectrogram(compute::to_spectrum<float>(res.p), dir / "pem.pgm");
  for (std::size_t i = 0; i < res.refinement.f.size(); ++i)
    export_spectrogram(compute::to_spectrum<float>(res.refinement.f[i]),
                       dir / ("f" + std::to_string(i + 1) + ".pgm"));
  export_spectrogram(compute::to_spectrum<float>(res.output()), dir / "final.pgm");
  err << "wrote " << res.refinement.f.size() + 3 << " panels to " << dir.string() << "\n";
  return 0;
}

inline int run_audit(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.in, "--in", "audit");
  require(o.checkpoint, "--checkpoint", "audit");
  auto lm = load_model(o);
  report_config("audit", lm.config, err);
  auto spec = stft<float>(load_input(o.in), lm.model->config().stft());
  auto res = lm.model->forward(compute::spectrum_tensor<float>(spec));
  auto rep = audit_ledger(res.refinement.ledger);
  out << rep.summary();
  if (!rep.passed()) throw AuditError(rep.message);
  return 0;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"RUI speech enhancement: refinement of a pre-enhanced spectrum guided by harmonic attention"};
  app.require_subcommand(1);
  Options o;
  long long seed = 0;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--config", o.config, "flat key = value config file");
    sc->add_option("--set", o.overrides, "override K=V (repeatable)")->allow_extra_args(false);
    sc->add_option("--in", o.in, "input WAV, directory, manifest or corpus root");
    sc->add_option("--out", o.out, "output path");
    sc->add_option("--manifest", o.manifest, "manifest CSV");
    sc->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    sc->add_option("--seed", seed, "seed override");
  };
  std::vector<CLI::App*> subs;
  for (const char* name : {"prepare", "train", "enhance", "eval", "viz", "audit"}) {
    static const std::map<std::string, std::string> help = {
        {"prepare", "build a mixture manifest from <in>/clean and <in>/noise"},
        {"train", "train a model on a manifest"},
        {"enhance", "enhance a WAV file, a directory or a manifest"},
        {"eval", "SI-SDR and STOI of noisy and enhanced test rows"},
        {"viz", "spectrogram panels of each stage"},
        {"audit", "check the refinement identities on one input"}};
    auto* sc = app.add_subcommand(name, help.at(name));
    add_common(sc);
    subs.push_back(sc);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }
  try {
    for (auto* sc : subs) {
      if (!sc->parsed()) continue;
      if (sc->count("--seed")) o.seed = seed;
      const std::string name = sc->get_name();
      if (name == "prepare") return run_prepare(o, err);
      if (name == "train") return run_train(o, err);
      if (name == "enhance") return run_enhance(o, err);
      if (name == "eval") return run_eval(o, err);
      if (name == "viz") return run_viz(o, err);
      if (name == "audit") return run_audit(o, out, err);
    }
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace rui::cli
