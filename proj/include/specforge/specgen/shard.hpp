#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/specgen/spectrogram.hpp"

namespace specforge::specgen {

// "SGS1" shard: header {magic, u32 version, u32 count, u32 T, u32 K, u32 C},
// then per record a 32-byte label block and T*K*C float32 samples. All
// integers and floats little-endian.
inline constexpr char kShardMagic[4] = {'S', 'G', 'S', '1'};
inline constexpr std::uint32_t kShardVersion = 1;
inline constexpr std::size_t kLabelBlockBytes = 32;
inline constexpr std::size_t kScenarioIdBytes = 16;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string serialize_shard(const std::vector<Spectrogram>& records) {
  if (records.empty()) throw ShapeError("serialize_shard: no records");
  const std::size_t t = records[0].t, k = records[0].k, c = records[0].c;
  std::string out;
  out.reserve(24 + records.size() * (kLabelBlockBytes + t * k * c * 4));
  out.append(kShardMagic, 4);
  detail::put_le<std::uint32_t>(out, kShardVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(records.size()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(k));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  for (const auto& s : records) {
    if (s.t != t || s.k != k || s.c != c) throw ShapeError("serialize_shard: mixed dimensions");
    out.push_back(static_cast<char>(s.label.protocol));
    out.push_back(static_cast<char>(s.label.modulation));
    out.push_back(static_cast<char>(s.label.mobility));
    out.push_back('\0');
    detail::put_le<float>(out, s.label.snr_db);
    detail::put_le<std::uint64_t>(out, s.label.seed);
    char scen[kScenarioIdBytes] = {};
    std::memcpy(scen, s.label.scenario_id.data(),
                std::min(s.label.scenario_id.size(), kScenarioIdBytes));
    out.append(scen, kScenarioIdBytes);
    for (float v : s.data) detail::put_le<float>(out, v);
  }
  return out;
}

inline void write_shard(const std::string& path, const std::vector<Spectrogram>& records) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  const std::string bytes = serialize_shard(records);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path);
}

inline std::vector<Spectrogram> parse_shard(const std::string& bytes, bool normalized = true) {
  if (bytes.size() < 24) throw TruncatedShard("shard shorter than header");
  if (std::memcmp(bytes.data(), kShardMagic, 4) != 0) throw BadMagic("not an SGS1 shard");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kShardVersion)
    throw VersionMismatch("shard version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto t = detail::get_le<std::uint32_t>(bytes.data() + 12);
  const auto k = detail::get_le<std::uint32_t>(bytes.data() + 16);
  const auto c = detail::get_le<std::uint32_t>(bytes.data() + 20);
  const std::size_t rec_bytes = kLabelBlockBytes + static_cast<std::size_t>(t) * k * c * 4;
  if (bytes.size() != 24 + count * rec_bytes)
    throw TruncatedShard("shard length does not match header");
  std::vector<Spectrogram> out(count);
  const char* p = bytes.data() + 24;
  for (std::uint32_t i = 0; i < count; ++i) {
    Spectrogram& s = out[i];
    s.t = t;
    s.k = k;
    s.c = c;
    s.normalized = normalized;
    s.label.protocol = static_cast<baseband::Protocol>(static_cast<unsigned char>(p[0]));
    s.label.modulation = static_cast<baseband::Modulation>(static_cast<unsigned char>(p[1]));
    s.label.mobility = static_cast<channel::Mobility>(static_cast<unsigned char>(p[2]));
    s.label.snr_db = detail::get_le<float>(p + 4);
    s.label.seed = detail::get_le<std::uint64_t>(p + 8);
    const char* scen = p + 16;
    std::size_t len = 0;
    while (len < kScenarioIdBytes && scen[len] != '\0') ++len;
    s.label.scenario_id.assign(scen, len);
    p += kLabelBlockBytes;
    s.data.resize(static_cast<std::size_t>(t) * k * c);
    for (auto& v : s.data) {
      v = detail::get_le<float>(p);
      p += 4;
    }
  }
  return out;
}

inline std::vector<Spectrogram> read_shard(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_shard(bytes);
}

}  // namespace specforge::specgen
