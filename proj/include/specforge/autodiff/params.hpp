#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

#include <json.hpp>

namespace specforge::ad {

// Registry over a model's Params; drives the optimizer, checkpointing and
// the frozen/trainable switch.
template <class Real>
class ParamSet {
 public:
  Param<Real>& add(const std::string& name, Shape shape) {
    params_.push_back(std::make_unique<Param<Real>>(name, std::move(shape)));
    return *params_.back();
  }

  std::vector<Param<Real>*> all() {
    std::vector<Param<Real>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const Param<Real>*> all() const {
    std::vector<const Param<Real>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  Param<Real>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t count_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  // copy values by name from another set (cloning a model)
  void copy_values_from(const ParamSet<Real>& other) {
    for (auto& p : params_) {
      const Param<Real>* src = nullptr;
      for (const auto* q : other.all())
        if (q->name == p->name) src = q;
      if (!src) throw ConfigError("copy_values_from: missing " + p->name);
      if (src->shape != p->shape) throw ShapeError("copy_values_from: shape mismatch " + p->name);
      p->value = src->value;
    }
  }

  // snapshot / restore of raw values (early stopping, best-checkpoint)
  std::vector<std::vector<Real>> snapshot() const {
    std::vector<std::vector<Real>> s;
    s.reserve(params_.size());
    for (const auto& p : params_) s.push_back(p->value);
    return s;
  }
  void restore(const std::vector<std::vector<Real>>& s) {
    if (s.size() != params_.size()) throw ShapeError("restore: wrong snapshot");
    for (std::size_t i = 0; i < s.size(); ++i) params_[i]->value = s[i];
  }

  // content hash of all values, for frozen-parameter contracts
  std::uint64_t value_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params_) {
      h = fnv1a(p->name, h);
      h = fnv1a(p->value.data(), p->value.size() * sizeof(Real), h);
    }
    return h;
  }

 private:
  std::vector<std::unique_ptr<Param<Real>>> params_;
};

// ---------------------------------------------------------------------------
// checkpoint container: magic, u32 version, u64 JSON index length, JSON
// index, then raw float32 little-endian tensor payloads.

inline constexpr char kCkptMagic[4] = {'S', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCkptVersion = 1;

namespace detail {
template <class T>
void write_le(std::ofstream& f, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  f.write(bytes, sizeof(T));
}
template <class T>
T read_le(std::ifstream& f) {
  char bytes[sizeof(T)];
  f.read(bytes, sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}
}  // namespace detail

template <class Real>
void save_checkpoint(const std::string& path, const ParamSet<Real>& params,
                     const nlohmann::json& meta = {}) {
  nlohmann::json index;
  index["version"] = kCkptVersion;
  if (!meta.is_null() && !meta.empty()) index["meta"] = meta;
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto* p : params.all()) {
    tensors.push_back({{"name", p->name},
                       {"shape", p->shape},
                       {"offset", offset},
                       {"nbytes", p->value.size() * 4}});
    offset += p->value.size() * 4;
  }
  index["tensors"] = tensors;
  const std::string index_str = index.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(kCkptMagic, 4);
  detail::write_le<std::uint32_t>(f, kCkptVersion);
  detail::write_le<std::uint64_t>(f, index_str.size());
  f.write(index_str.data(), static_cast<std::streamsize>(index_str.size()));
  for (const auto* p : params.all()) {
    for (Real v : p->value) detail::write_le<float>(f, static_cast<float>(v));
  }
  if (!f) throw IoError("short write to " + path);
}

// Index metadata only, without loading tensor payloads.
inline nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCkptMagic, 4) != 0) throw BadMagic("not a checkpoint file");
  const auto version = detail::read_le<std::uint32_t>(f);
  if (version != kCkptVersion) throw VersionMismatch("checkpoint version " + std::to_string(version));
  const auto index_len = detail::read_le<std::uint64_t>(f);
  std::string index_str(index_len, '\0');
  f.read(index_str.data(), static_cast<std::streamsize>(index_len));
  if (!f) throw TruncatedShard("checkpoint index truncated");
  const nlohmann::json index = nlohmann::json::parse(index_str);
  return index.contains("meta") ? index["meta"] : nlohmann::json{};
}

// Loads by name into an already-constructed ParamSet; shapes must match.
template <class Real>
nlohmann::json load_checkpoint(const std::string& path, ParamSet<Real>& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kCkptMagic, 4) != 0) throw BadMagic("not a checkpoint file");
  const auto version = detail::read_le<std::uint32_t>(f);
  if (version != kCkptVersion) throw VersionMismatch("checkpoint version " + std::to_string(version));
  const auto index_len = detail::read_le<std::uint64_t>(f);
  std::string index_str(index_len, '\0');
  f.read(index_str.data(), static_cast<std::streamsize>(index_len));
  if (!f) throw TruncatedShard("checkpoint index truncated");
  const nlohmann::json index = nlohmann::json::parse(index_str);
  const std::streampos data_start = f.tellg();
  for (const auto& t : index.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    Param<Real>* p = params.find(name);
    if (!p) throw ConfigError("checkpoint tensor not in model: " + name);
    const Shape shape = t.at("shape").get<Shape>();
    if (shape != p->shape) throw ShapeError("checkpoint shape mismatch for " + name);
    f.seekg(data_start + static_cast<std::streamoff>(t.at("offset").get<std::uint64_t>()));
    for (auto& v : p->value) v = static_cast<Real>(detail::read_le<float>(f));
    if (!f) throw TruncatedShard("checkpoint payload truncated at " + name);
  }
  return index.contains("meta") ? index["meta"] : nlohmann::json{};
}

}  // namespace specforge::ad
