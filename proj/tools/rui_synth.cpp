// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Writes a synthetic corpus:
//   <out>/clean/spkSS_uttUU.wav   <out>/noise/<kind>_NN.wav
//   <out>/test/clean/...          <out>/test/noise/...   (unseen voices and noise draws)

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "rui/synth.hpp"

namespace fs = std::filesystem;

namespace {

void write_set(const fs::path& root, std::size_t speakers, std::size_t utts, std::size_t noises,
               double seconds, std::mt19937_64& rng) {
  using namespace rui::synth;
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noise");
  const auto n = static_cast<std::size_t>(seconds * rui::kSampleRate);
  char name[64];
  for (std::size_t s = 0; s < speakers; ++s) {
    const Voice v = random_voice(rng);
    for (std::size_t u = 0; u < utts; ++u) {
      std::snprintf(name, sizeof(name), "spk%02zu_utt%02zu.wav", s, u);
      rui::save_wav(utterance_clip(v, n, rng), root / "clean" / name);
    }
  }
  const std::size_t kinds = std::size(kNoiseKinds);
  for (std::size_t i = 0; i < noises; ++i) {
    const NoiseKind k = kNoiseKinds[i % kinds];
    std::snprintf(name, sizeof(name), "%s_%02zu.wav", to_string(k).c_str(), i / kinds);
    rui::save_wav(noise_clip(k, n, rng), root / "noise" / name);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic speech and noise corpus"};
  std::string out;
  std::size_t speakers = 10, utts = 12, noises = 12, test_speakers = 4, test_utts = 5, test_noises = 6;
  double seconds = 8.0;
  std::uint64_t seed = 1;
  app.add_option("--out", out, "output directory")->required();
  app.add_option("--speakers", speakers, "training voices");
  app.add_option("--utterances", utts, "utterances per training voice");
  app.add_option("--noises", noises, "noise files (cycling through the noise kinds)");
  app.add_option("--test-speakers", test_speakers, "held-out voices");
  app.add_option("--test-utterances", test_utts, "utterances per held-out voice");
  app.add_option("--test-noises", test_noises, "held-out noise files");
  app.add_option("--seconds", seconds, "length of every file");
  app.add_option("--seed", seed, "generator seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    std::mt19937_64 rng(seed);
    write_set(out, speakers, utts, noises, seconds, rng);
    if (test_speakers > 0) write_set(fs::path(out) / "test", test_speakers, test_utts, test_noises, seconds, rng);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
