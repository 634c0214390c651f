#pragma once

// Binary parameter checkpoint.
//
//   "INRLABCK"                      8 bytes
//   u32 version (1), u32 count      little endian
//   count x { u32 name_len, name, u64 rows, u64 cols, rows*cols f64 }
//
// Doubles are stored as their IEEE-754 bit patterns, so save/load/save is bit-exact.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "inrlab/diffcore.hpp"
#include "inrlab/errors.hpp"
#include "inrlab/models.hpp"

namespace inrlab {

inline constexpr std::array<char, 8> kCheckpointMagic = {'I', 'N', 'R', 'L', 'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> values;
};

namespace detail {

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

template <class U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw ConfigError("checkpoint: truncated file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.values.size() != e.rows * e.cols) throw ConfigError("checkpoint: '" + e.name + "' shape/length mismatch");
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    detail::put_le<std::uint64_t>(out, e.rows);
    detail::put_le<std::uint64_t>(out, e.cols);
    for (double v : e.values) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline std::vector<CheckpointEntry> decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw ConfigError("checkpoint: bad magic");
  }
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(bytes, pos);
  std::vector<CheckpointEntry> entries(count);
  for (auto& e : entries) {
    const auto len = detail::get_le<std::uint32_t>(bytes, pos);
    if (pos + len > bytes.size()) throw ConfigError("checkpoint: truncated name");
    e.name = bytes.substr(pos, len);
    pos += len;
    e.rows = detail::get_le<std::uint64_t>(bytes, pos);
    e.cols = detail::get_le<std::uint64_t>(bytes, pos);
    const std::uint64_t n = e.rows * e.cols;
    if (n > (bytes.size() - pos) / 8) throw ConfigError("checkpoint: truncated values for '" + e.name + "'");
    e.values.resize(n);
    for (auto& v : e.values) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos));
  }
  if (pos != bytes.size()) throw ConfigError("checkpoint: trailing bytes");
  return entries;
}

inline std::vector<CheckpointEntry> snapshot_parameters(const Model& m) {
  std::vector<CheckpointEntry> out;
  for (const Parameter* p : m.parameters()) {
    out.push_back({p->name, p->rows, p->cols, {p->values.begin(), p->values.end()}});
  }
  return out;
}

/// Copies values into the model. Names, order and shapes must match exactly.
inline void restore_parameters(Model& m, const std::vector<CheckpointEntry>& entries) {
  auto params = m.parameters();
  if (params.size() != entries.size()) {
    throw ConfigError("checkpoint: holds " + std::to_string(entries.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    Parameter& p = *params[i];
    if (e.name != p.name || e.rows != p.rows || e.cols != p.cols) {
      throw ConfigError("checkpoint: entry '" + e.name + "' does not match parameter '" + p.name + "'");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->values.assign(entries[i].values.begin(), entries[i].values.end());
}

inline void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  const std::string bytes = encode_checkpoint(snapshot_parameters(m));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

inline void load_checkpoint(Model& m, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  restore_parameters(m, decode_checkpoint(ss.str()));
}

}  // namespace inrlab
