// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Checkpoint container:
//   "RUICKPT1" | u64 LE header length | UTF-8 JSON header | f32 LE payload
// The header holds {"version", "config", "params": {name: {"shape", "offset"}}},
// offsets in bytes from the start of the payload, parameters in name order.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "rui/compute/params.hpp"

namespace rui::compute {

inline constexpr char kCheckpointMagic[8] = {'R', 'U', 'I', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCheckpointVersion = 1;

using ConfigSnapshot = std::map<std::string, std::string>;

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& params,
                     const ConfigSnapshot& config) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["config"] = config;
  nlohmann::json table = nlohmann::json::object();
  std::size_t offset = 0;
  for (const auto& [name, e] : params.entries()) {
    table[name] = {{"shape", e.tensor.shape()}, {"offset", offset}};
    offset += e.tensor.numel() * sizeof(float);
  }
  header["params"] = table;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, e] : params.entries()) {
    for (T v : e.tensor.value()) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

struct CheckpointHeader {
  int version = 0;
  ConfigSnapshot config;
  nlohmann::json params;
  std::size_t payload_offset = 0;
};

inline CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError(path.string() + ": not a RUICKPT1 checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw FormatError(path.string() + ": corrupt header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError(path.string() + ": truncated header");
  CheckpointHeader h;
  try {
    auto j = nlohmann::json::parse(text);
    h.version = j.at("version").get<int>();
    h.config = j.at("config").get<ConfigSnapshot>();
    h.params = j.at("params");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  if (h.version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(h.version));
  h.payload_offset = 8 + sizeof(std::uint64_t) + len;
  return h;
}

/// Fills `params` (whose structure must match the file) and returns the
/// stored configuration snapshot.
template <typename T>
ConfigSnapshot load_checkpoint(const std::filesystem::path& path, ParamStore<T>& params) {
  CheckpointHeader h = read_checkpoint_header(path);
  if (h.params.size() != params.size())
    throw ShapeError(path.string() + ": checkpoint holds " + std::to_string(h.params.size()) +
                     " parameters, model expects " + std::to_string(params.size()));
  std::ifstream in(path, std::ios::binary);
  for (const auto& [name, e] : params.entries()) {
    if (!h.params.contains(name)) throw ShapeError(path.string() + ": missing parameter " + name);
    const auto& rec = h.params.at(name);
    Shape shape = rec.at("shape").template get<Shape>();
    if (shape != e.tensor.shape())
      throw ShapeError(path.string() + ": parameter " + name + " has shape " + to_string(shape) +
                       ", model expects " + to_string(e.tensor.shape()));
    const auto offset = rec.at("offset").template get<std::size_t>();
    in.seekg(static_cast<std::streamoff>(h.payload_offset + offset));
    Tensor<T> t = e.tensor;
    auto& v = t.mutable_value();
    std::vector<float> buf(v.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
    if (!in) throw FormatError(path.string() + ": truncated payload for " + name);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(buf[i]);
  }
  return h.config;
}

}  // namespace rui::compute
