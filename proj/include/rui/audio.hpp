// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rui/error.hpp"

namespace rui {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

inline constexpr int kSampleRate = 16000;

/// Mono waveform. Every pipeline entry point requires 16 kHz.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kSampleRate;

  std::size_t size() const noexcept { return samples.size(); }
  double seconds() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Throws unless every sample is finite and within full scale.
inline void validate(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw RateError("invalid sample rate");
  for (float v : clip.samples) {
    if (!std::isfinite(v)) throw FormatError("non-finite sample");
    if (std::abs(v) > 1.0f + 1e-6f) throw FormatError("sample exceeds full scale");
  }
}

/// Scales the clip down to `peak` if any sample exceeds full scale; returns the factor.
inline double limit_to_full_scale(AudioClip& clip, double peak = 0.99) {
  float m = 0.0f;
  for (float v : clip.samples) m = std::max(m, std::abs(v));
  if (m <= 1.0f) return 1.0;
  const double g = peak / static_cast<double>(m);
  for (float& v : clip.samples) v = static_cast<float>(static_cast<double>(v) * g);
  return g;
}

inline void require_pipeline_rate(const AudioClip& clip) {
  if (clip.sample_rate_hz != kSampleRate)
    throw RateError("unsupported sample rate " +
                    std::to_string(clip.sample_rate_hz) + " Hz (expected 16000)");
}

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
inline std::uint32_t read_u32(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
template <typename V>
void append(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatFloat = 3;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

/// Decodes a RIFF/WAVE byte buffer (PCM16 or float-32, any channel count).
/// Multichannel audio is downmixed by the channel mean.
inline AudioClip decode_wav(const std::vector<unsigned char>& bytes) {
  using namespace detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE container");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::uint32_t len = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || len > avail) throw FormatError("truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible) {
        if (len < 40) throw FormatError("truncated WAVE_FORMAT_EXTENSIBLE header");
        format = read_u16(chunk + 8 + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = std::min<std::size_t>(len, avail);
      break;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (data == nullptr) throw FormatError("missing data chunk");
  if (channels == 0) throw FormatError("zero channels");

  bool pcm16 = format == kFormatPcm && bits == 16;
  bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError("unsupported codec (format tag " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits); expected PCM16 or float-32");
  if (rate != static_cast<std::uint32_t>(kSampleRate))
    throw RateError("unsupported sample rate " + std::to_string(rate) +
                    " Hz (expected 16000)");

  std::size_t width = bits / 8;
  std::size_t frames = data_len / (width * channels);
  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const unsigned char* frame = data + i * width * channels;
    if (channels == 1) {
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, frame, 2);
        clip.samples[i] = static_cast<float>(s) / 32768.0f;
      } else {
        std::memcpy(&clip.samples[i], frame, 4);
      }
      continue;
    }
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, frame + 2 * c, 2);
        acc += static_cast<double>(s) / 32768.0;
      } else {
        float s;
        std::memcpy(&s, frame + 4 * c, 4);
        acc += s;
      }
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  validate(clip);
  return clip;
}

inline AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const RateError& e) {
    throw RateError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Float-32 mono RIFF image of a clip.
inline std::string encode_wav(const AudioClip& clip) {
  using namespace detail;
  auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 4);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  append<std::uint32_t>(out, 36 + data_len);
  out.append("WAVEfmt ");
  append<std::uint32_t>(out, 16);
  append<std::uint16_t>(out, kFormatFloat);
  append<std::uint16_t>(out, 1);
  append<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  append<std::uint32_t>(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 4);
  append<std::uint16_t>(out, 4);
  append<std::uint16_t>(out, 32);
  out.append("data");
  append<std::uint32_t>(out, data_len);
  out.append(reinterpret_cast<const char*>(clip.samples.data()), data_len);
  return out;
}

inline void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  validate(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::string bytes = encode_wav(clip);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace rui
