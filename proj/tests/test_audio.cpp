// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "rui/audio.hpp"
#include "test_util.hpp"

namespace rui {
namespace {

using rui::testing::TempDir;

// Hand-assembled RIFF image; independent of encode_wav.
std::vector<unsigned char> riff(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                std::uint16_t bits, const std::vector<unsigned char>& payload) {
  std::vector<unsigned char> b;
  auto put = [&b](std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
  };
  auto tag = [&b](const char* s) { b.insert(b.end(), s, s + 4); };
  tag("RIFF");
  put(36 + payload.size(), 4);
  tag("WAVE");
  tag("fmt ");
  put(16, 4);
  put(format, 2);
  put(channels, 2);
  put(rate, 4);
  put(rate * channels * bits / 8, 4);
  put(channels * bits / 8, 2);
  put(bits, 2);
  tag("data");
  put(payload.size(), 4);
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

std::vector<unsigned char> pcm16(const std::vector<std::int16_t>& v) {
  std::vector<unsigned char> out;
  for (auto s : v) {
    out.push_back(static_cast<unsigned char>(s & 0xff));
    out.push_back(static_cast<unsigned char>((s >> 8) & 0xff));
  }
  return out;
}

std::vector<unsigned char> f32(const std::vector<float>& v) {
  std::vector<unsigned char> out(v.size() * 4);
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                           static_cast<std::streamsize>(b.size()));
}

TEST(LoadWav, Pcm16FixedPointScaling) {
  auto clip = decode_wav(riff(1, 1, 16000, 16, pcm16(std::vector<std::int16_t>(100, 16384))));
  ASSERT_EQ(clip.samples.size(), 100u);
  for (float s : clip.samples) EXPECT_EQ(s, 0.5f);
  auto ext = decode_wav(riff(1, 1, 16000, 16, pcm16({-32768, 32767})));
  EXPECT_EQ(ext.samples[0], -1.0f);
  EXPECT_LT(ext.samples[1], 1.0f);
}

TEST(LoadWav, StereoIsDownmixedByChannelMean) {
  std::vector<float> inter;
  for (int i = 0; i < 50; ++i) {
    inter.push_back(0.2f);
    inter.push_back(0.4f);
  }
  auto clip = decode_wav(riff(3, 2, 16000, 32, f32(inter)));
  ASSERT_EQ(clip.samples.size(), 50u);
  for (float s : clip.samples) EXPECT_NEAR(s, 0.3f, 1e-7);
}

TEST(LoadWav, DownmixIsLinear) {
  auto a = rui::testing::uniform(64, 5, -0.5, 0.5), b = rui::testing::uniform(64, 6, -0.5, 0.5);
  std::vector<float> inter, fa(a.begin(), a.end()), fb(b.begin(), b.end());
  for (std::size_t i = 0; i < 64; ++i) {
    inter.push_back(fa[i]);
    inter.push_back(fb[i]);
  }
  auto mix = decode_wav(riff(3, 2, 16000, 32, f32(inter)));
  auto ca = decode_wav(riff(3, 1, 16000, 32, f32(fa)));
  auto cb = decode_wav(riff(3, 1, 16000, 32, f32(fb)));
  for (std::size_t i = 0; i < 64; ++i)
    EXPECT_NEAR(mix.samples[i], 0.5 * (ca.samples[i] + cb.samples[i]), 1e-7);
}

TEST(LoadWav, WrongRateNamesTheRate) {
  TempDir dir("audio");
  write_bytes(dir / "8k.wav", riff(1, 1, 8000, 16, pcm16({0, 1, 2})));
  try {
    load_wav(dir / "8k.wav");
    FAIL() << "expected a rate error";
  } catch (const RateError& e) {
    EXPECT_NE(std::string(e.what()).find("8000"), std::string::npos);
  }
}

TEST(LoadWav, UnsupportedCodecAndGarbage) {
  EXPECT_THROW(decode_wav(riff(1, 1, 16000, 24, std::vector<unsigned char>(9, 0))), FormatError);
  EXPECT_THROW(decode_wav(riff(6, 1, 16000, 8, std::vector<unsigned char>(4, 0))), FormatError);
  EXPECT_THROW(decode_wav({'n', 'o', 'p', 'e'}), FormatError);
  EXPECT_THROW(decode_wav(riff(3, 1, 16000, 32, f32({std::nanf("")}))), FormatError);
  TempDir dir("audio");
  EXPECT_THROW(load_wav(dir / "missing.wav"), IoError);
}

TEST(SaveWav, NoiseRoundTripIsExact) {
  TempDir dir("audio");
  auto clip = rui::testing::noise_clip(16000, 17, 0.9);
  save_wav(clip, dir / "n.wav");
  auto back = load_wav(dir / "n.wav");
  ASSERT_EQ(back.samples.size(), clip.samples.size());
  double worst = 0;
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    worst = std::max(worst, static_cast<double>(std::abs(back.samples[i] - clip.samples[i])));
  EXPECT_EQ(worst, 0.0);
}

TEST(SaveWav, EmptyClipIsAValidFile) {
  TempDir dir("audio");
  save_wav(AudioClip{}, dir / "e.wav");
  EXPECT_TRUE(load_wav(dir / "e.wav").samples.empty());
}

TEST(SaveWav, ChirpRoundTripIsByteIdentical) {
  TempDir dir("audio");
  AudioClip c;
  const double f0 = 100.0, f1 = 4000.0, dur = 1.0;
  for (int i = 0; i < 16000; ++i) {
    const double t = i / 16000.0;
    const double phase = 2 * std::numbers::pi * (f0 * t + (f1 - f0) * t * t / (2 * dur));
    c.samples.push_back(static_cast<float>(0.8 * std::sin(phase)));
  }
  save_wav(c, dir / "chirp.wav");
  auto back = load_wav(dir / "chirp.wav");
  ASSERT_EQ(back.samples.size(), c.samples.size());
  EXPECT_EQ(std::memcmp(back.samples.data(), c.samples.data(), c.samples.size() * 4), 0);
  save_wav(back, dir / "chirp2.wav");
  std::ifstream a(dir / "chirp.wav", std::ios::binary), b(dir / "chirp2.wav", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST(SaveWav, RejectsOutOfRangeAndUnwritable) {
  TempDir dir("audio");
  AudioClip loud;
  loud.samples = {0.0f, 1.5f};
  EXPECT_THROW(save_wav(loud, dir / "loud.wav"), FormatError);
  EXPECT_THROW(save_wav(AudioClip{}, dir / "no" / "such" / "dir.wav"), IoError);
}

TEST(Audio, LimitToFullScaleOnlyTouchesOverloadedClips) {
  AudioClip quiet;
  quiet.samples = {0.5f, -0.25f};
  EXPECT_EQ(limit_to_full_scale(quiet), 1.0);
  EXPECT_EQ(quiet.samples[0], 0.5f);
  AudioClip loud;
  loud.samples = {2.0f, -4.0f};
  EXPECT_NEAR(limit_to_full_scale(loud), 0.99 / 4.0, 1e-12);
  EXPECT_NEAR(loud.samples[1], -0.99f, 1e-6);
}

}  // namespace
}  // namespace rui
