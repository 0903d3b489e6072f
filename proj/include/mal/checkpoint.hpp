// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mal/model.hpp"

// Checkpoint layout, all integers unsigned 32-bit little-endian:
//   "MALCKPT1" | entry count | per entry: name length, UTF-8 name, rank,
//   dims..., raw 32-bit little-endian IEEE floats.
namespace mal {

inline constexpr std::array<char, 8> kCheckpointMagic{'M', 'A', 'L', 'C', 'K', 'P', 'T', '1'};
inline const std::string kSwitchesEntry = "meta.switches";

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint: truncated payload");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::vector<CheckpointEntry>& entries) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (shape_size(e.shape) != e.values.size()) throw DimensionError("checkpoint entry " + e.name + ": bad shape");
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
}

inline std::vector<CheckpointEntry> read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic) {
    throw FormatError("checkpoint: unknown magic (expected MALCKPT1)");
  }
  const std::uint32_t count = detail::get_u32(in);
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    const std::uint32_t len = detail::get_u32(in);
    if (len > (1u << 16)) throw FormatError("checkpoint: implausible name length");
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw FormatError("checkpoint: truncated payload");
    const std::uint32_t rank = detail::get_u32(in);
    if (rank > 8) throw FormatError("checkpoint: implausible rank for " + e.name);
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(detail::get_u32(in));
      n *= e.shape.back();
      if (n > (std::size_t{1} << 32)) throw FormatError("checkpoint: implausible size for " + e.name);
    }
    e.values.resize(n);
    for (auto& v : e.values) v = std::bit_cast<float>(detail::get_u32(in));
    entries.push_back(std::move(e));
  }
  return entries;
}

template <typename T>
std::vector<CheckpointEntry> snapshot(const ParamStore<T>& params) {
  std::vector<CheckpointEntry> out;
  for (const auto& e : params.entries()) {
    CheckpointEntry c{e.name, e.tensor.shape(), {}};
    c.values.reserve(e.tensor.size());
    for (T v : e.tensor.data()) c.values.push_back(static_cast<float>(v));
    out.push_back(std::move(c));
  }
  return out;
}

inline CheckpointEntry switches_entry(const Switches& sw) {
  return {kSwitchesEntry,
          {5},
          {sw.salience_loss ? 1.f : 0.f, sw.use_cs ? 1.f : 0.f, sw.use_cu ? 1.f : 0.f,
           sw.stop_cs_gradient ? 1.f : 0.f, static_cast<float>(sw.damping)}};
}

inline const CheckpointEntry* find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

/// Switches stored with the checkpoint, or the defaults when absent.
inline Switches stored_switches(const std::vector<CheckpointEntry>& entries) {
  Switches sw;
  if (const auto* e = find_entry(entries, kSwitchesEntry)) {
    if (e->values.size() != 5) throw FormatError("checkpoint: malformed " + kSwitchesEntry);
    sw.salience_loss = e->values[0] != 0.f;
    sw.use_cs = e->values[1] != 0.f;
    sw.use_cu = e->values[2] != 0.f;
    sw.stop_cs_gradient = e->values[3] != 0.f;
    sw.damping = std::round(static_cast<double>(e->values[4]) * 1e6) / 1e6;
  }
  return sw;
}

/// Architecture implied by the parameter shapes.
inline ModelConfig infer_config(const std::vector<CheckpointEntry>& entries) {
  const auto* out = find_entry(entries, "dec.out.W");
  const auto* emb = find_entry(entries, "enc.embed");
  if (!out || !emb || out->shape.size() != 2 || emb->shape.size() != 2) {
    throw FormatError("checkpoint: missing decoder output or encoder embedding");
  }
  ModelConfig cfg;
  cfg.vocab_size = out->shape[0];
  cfg.k_h = out->shape[1];
  cfg.k_e = emb->shape[1];
  cfg.supervised_branch = find_entry(entries, "sal.b_r") != nullptr;
  cfg.graph_branch = find_entry(entries, "graph.W_p") != nullptr;
  cfg.tie_embeddings = find_entry(entries, "dec.embed") == nullptr;
  return cfg;
}

/// Copies checkpoint values into `params`. Every parameter must be present
/// with the same shape; entries under "meta." are ignored.
template <typename T>
void restore(ParamStore<T>& params, const std::vector<CheckpointEntry>& entries) {
  for (auto& p : params.entries()) {
    const auto* e = find_entry(entries, p.name);
    if (!e) throw FormatError("checkpoint: missing parameter " + p.name);
    if (e->shape != p.tensor.shape()) {
      throw FormatError("checkpoint: parameter " + p.name + " has shape " + shape_string(e->shape) + ", expected " +
                        shape_string(p.tensor.shape()));
    }
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e->values[i]);
  }
  for (const auto& e : entries) {
    if (e.name.rfind("meta.", 0) == 0) continue;
    if (!params.contains(e.name)) throw FormatError("checkpoint: unexpected parameter " + e.name);
  }
}

template <typename T>
MalModel<T> model_from_checkpoint(const std::vector<CheckpointEntry>& entries) {
  MalModel<T> model(infer_config(entries));
  restore(model.params(), entries);
  return model;
}

/// Writes to `path` through a temporary file renamed on success.
inline void save_checkpoint_file(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint: " + tmp);
    write_checkpoint(out, entries);
    if (!out.flush()) throw Error("cannot write checkpoint: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<CheckpointEntry> load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint: " + path);
  return read_checkpoint(in);
}

}  // namespace mal
