#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specforge/baseband/frame.hpp"
#include "specforge/channel/tdl.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"
#include "specforge/specgen/shard.hpp"
#include "specforge/specgen/spectrogram.hpp"
#include "specforge/specgen/stft.hpp"

#include <json.hpp>

namespace specforge::specgen {

struct GenConfig {
  std::string scenario_id = "desk";
  std::uint64_t master_seed = 1;
  std::vector<baseband::Protocol> protocols = {baseband::Protocol::kWifiLike,
                                               baseband::Protocol::kLteLike,
                                               baseband::Protocol::kNrLike};
  std::vector<baseband::Modulation> modulations = {
      baseband::Modulation::kBpsk, baseband::Modulation::kQpsk, baseband::Modulation::kQam16,
      baseband::Modulation::kQam64, baseband::Modulation::kQam256};
  baseband::CodeScheme code = baseband::CodeScheme::kRepeat2;
  std::vector<double> snrs_db = {0.0, 20.0};
  std::vector<channel::Mobility> mobilities = {channel::Mobility::kStatic,
                                               channel::Mobility::kVehicular};
  std::size_t n_realizations = 10;

  double sample_rate_hz = 31250.0;
  double carrier_hz = 3.5e9;

  std::size_t n_paths = 4;
  double delay_spread_s = 64e-6;
  double decay_db = 10.0;
  std::optional<channel::PathProfile> fixed_profile;  // external ray-traced hook

  std::size_t n_window = 64;
  std::size_t hop = 32;
  std::string window = "hann";
  std::size_t out_frames = 64;  // T
  std::size_t interleaver_rows = 4;
  std::size_t shard_max_records = 100000;
  std::optional<NormStats> norm_stats;  // normalize with pretrained statistics
  std::vector<baseband::ProtocolTemplate> template_overrides;

  baseband::ProtocolTemplate template_for(baseband::Protocol p) const {
    for (const auto& t : template_overrides)
      if (t.id == p) return t;
    return baseband::default_template(p);
  }

  std::size_t grid_size() const {
    return protocols.size() * modulations.size() * snrs_db.size() * mobilities.size() *
           n_realizations;
  }
  std::size_t needed_samples() const { return n_window + hop * (out_frames - 1); }
};

inline nlohmann::json to_json(const GenConfig& c) {
  nlohmann::json j;
  j["scenario_id"] = c.scenario_id;
  j["master_seed"] = c.master_seed;
  nlohmann::json protos = nlohmann::json::array();
  for (auto p : c.protocols) protos.push_back(baseband::to_string(p));
  j["protocols"] = protos;
  nlohmann::json mods = nlohmann::json::array();
  for (auto m : c.modulations) mods.push_back(baseband::to_string(m));
  j["modulations"] = mods;
  j["code"] = c.code == baseband::CodeScheme::kRepeat2 ? "REPEAT_2" : "IDENTITY";
  j["snrs_db"] = c.snrs_db;
  nlohmann::json mobs = nlohmann::json::array();
  for (auto m : c.mobilities) mobs.push_back(channel::to_string(m));
  j["mobilities"] = mobs;
  j["n_realizations"] = c.n_realizations;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["carrier_hz"] = c.carrier_hz;
  if (c.fixed_profile) {
    j["path_profile"] = channel::to_json(*c.fixed_profile);
  } else {
    j["paths"] = {{"n_paths", c.n_paths},
                  {"delay_spread_s", c.delay_spread_s},
                  {"decay_db", c.decay_db}};
  }
  j["stft"] = {{"n_window", c.n_window}, {"hop", c.hop}, {"window", c.window}};
  j["out_frames"] = c.out_frames;
  j["interleaver_rows"] = c.interleaver_rows;
  j["shard_max_records"] = c.shard_max_records;
  if (c.norm_stats)
    j["norm_stats"] = {{"mean", c.norm_stats->mean},
                       {"std", c.norm_stats->std},
                       {"epsilon", c.norm_stats->epsilon}};
  if (!c.template_overrides.empty()) {
    nlohmann::json templates = nlohmann::json::array();
    for (const auto& t : c.template_overrides) templates.push_back(baseband::to_json(t));
    j["templates"] = templates;
  }
  return j;
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  if (j.contains("scenario_id")) c.scenario_id = j["scenario_id"].get<std::string>();
  if (j.contains("master_seed")) c.master_seed = j["master_seed"].get<std::uint64_t>();
  if (j.contains("protocols")) {
    c.protocols.clear();
    for (const auto& s : j["protocols"]) c.protocols.push_back(baseband::protocol_from_string(s));
  }
  if (j.contains("modulations")) {
    c.modulations.clear();
    for (const auto& s : j["modulations"])
      c.modulations.push_back(baseband::modulation_from_string(s));
  }
  if (j.contains("code"))
    c.code = j["code"] == "REPEAT_2" ? baseband::CodeScheme::kRepeat2
                                     : baseband::CodeScheme::kIdentity;
  if (j.contains("snrs_db")) c.snrs_db = j["snrs_db"].get<std::vector<double>>();
  if (j.contains("mobilities")) {
    c.mobilities.clear();
    for (const auto& s : j["mobilities"]) c.mobilities.push_back(channel::mobility_from_string(s));
  }
  if (j.contains("n_realizations")) c.n_realizations = j["n_realizations"].get<std::size_t>();
  if (j.contains("sample_rate_hz")) c.sample_rate_hz = j["sample_rate_hz"].get<double>();
  if (j.contains("carrier_hz")) c.carrier_hz = j["carrier_hz"].get<double>();
  if (j.contains("path_profile"))
    c.fixed_profile = channel::path_profile_from_json(j["path_profile"]);
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    if (p.contains("n_paths")) c.n_paths = p["n_paths"].get<std::size_t>();
    if (p.contains("delay_spread_s")) c.delay_spread_s = p["delay_spread_s"].get<double>();
    if (p.contains("decay_db")) c.decay_db = p["decay_db"].get<double>();
  }
  if (j.contains("stft")) {
    const auto& s = j["stft"];
    if (s.contains("n_window")) c.n_window = s["n_window"].get<std::size_t>();
    if (s.contains("hop")) c.hop = s["hop"].get<std::size_t>();
    if (s.contains("window")) c.window = s["window"].get<std::string>();
  }
  if (j.contains("out_frames")) c.out_frames = j["out_frames"].get<std::size_t>();
  if (j.contains("interleaver_rows"))
    c.interleaver_rows = j["interleaver_rows"].get<std::size_t>();
  if (j.contains("shard_max_records"))
    c.shard_max_records = j["shard_max_records"].get<std::size_t>();
  if (j.contains("norm_stats")) {
    NormStats s;
    s.mean = j["norm_stats"]["mean"].get<double>();
    s.std = j["norm_stats"]["std"].get<double>();
    s.epsilon = j["norm_stats"]["epsilon"].get<double>();
    c.norm_stats = s;
  }
  if (j.contains("templates"))
    for (const auto& t : j["templates"])
      c.template_overrides.push_back(baseband::protocol_template_from_json(t));
  if (c.hop == 0 || c.hop > c.n_window) throw ConfigError("hop must be in [1, n_window]");
  if (c.out_frames == 0 || c.grid_size() == 0) throw ConfigError("empty generation grid");
  return c;
}

inline std::uint64_t config_hash(const nlohmann::json& j) { return fnv1a(j.dump()); }

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// One received frame -> raw power matrix P (row-major T x K), pre-normalization.
inline std::vector<double> synth_power_matrix(const GenConfig& cfg,
                                              const baseband::ProtocolTemplate& tpl,
                                              const baseband::Mcs& mcs, channel::Mobility mobility,
                                              double snr_db, std::uint64_t sample_seed) {
  auto x = baseband::synthesize_frame(tpl, mcs, mix_seed(sample_seed, 0xA), nullptr,
                                      cfg.interleaver_rows);
  x.sample_rate_hz = cfg.sample_rate_hz;

  const auto profile = cfg.fixed_profile
      ? *cfg.fixed_profile
      : channel::gen_scenario(mix_seed(sample_seed, 0xB), cfg.n_paths, cfg.delay_spread_s,
                              cfg.decay_db, cfg.scenario_id);
  const auto mob = channel::make_mobility(mobility, cfg.carrier_hz);
  const auto realization = channel::make_realization(profile, mob, cfg.sample_rate_hz, x.size(),
                                                     mix_seed(sample_seed, 0xC), snr_db);
  auto y = channel::apply_tdl(x, realization);
  y = channel::add_awgn(y, snr_db, mix_seed(sample_seed, 0xD));
  y.samples.resize(cfg.needed_samples());  // exact T frames, Eq.-consistent

  const auto stft_cfg = make_stft_config(cfg.n_window, cfg.hop, cfg.window);
  return power_spectrogram(y, stft_cfg);
}

struct GeneratedSet {
  std::vector<Spectrogram> records;
  NormStats stats;
};

// Full grid sweep, in memory. Per-sample seeds derive from the master seed
// and the grid coordinates, so any cell can be regenerated independently.
inline GeneratedSet generate_samples(const GenConfig& cfg) {
  GeneratedSet out;
  out.records.reserve(cfg.grid_size());
  std::vector<std::vector<double>> p_matrices;
  p_matrices.reserve(cfg.grid_size());
  std::vector<Label> labels;
  labels.reserve(cfg.grid_size());

  std::vector<baseband::ProtocolTemplate> templates;
  for (auto proto : cfg.protocols) {
    auto tpl = cfg.template_for(proto);
    baseband::fit_frame_length(tpl, cfg.needed_samples());
    templates.push_back(tpl);
  }

  for (std::size_t pi = 0; pi < cfg.protocols.size(); ++pi)
    for (std::size_t mi = 0; mi < cfg.modulations.size(); ++mi)
      for (std::size_t si = 0; si < cfg.snrs_db.size(); ++si)
        for (std::size_t vi = 0; vi < cfg.mobilities.size(); ++vi)
          for (std::size_t r = 0; r < cfg.n_realizations; ++r) {
            const std::uint64_t seed = mix_seed(cfg.master_seed, pi, mi, si, vi, r);
            baseband::Mcs mcs{cfg.modulations[mi], cfg.code};
            p_matrices.push_back(synth_power_matrix(cfg, templates[pi], mcs, cfg.mobilities[vi],
                                                    cfg.snrs_db[si], seed));
            Label lab;
            lab.protocol = cfg.protocols[pi];
            lab.modulation = cfg.modulations[mi];
            lab.mobility = cfg.mobilities[vi];
            lab.snr_db = static_cast<float>(cfg.snrs_db[si]);
            lab.seed = seed;
            lab.scenario_id = cfg.scenario_id;
            labels.push_back(lab);
          }

  out.stats = cfg.norm_stats ? *cfg.norm_stats : fit_norm_stats(p_matrices);
  for (std::size_t i = 0; i < p_matrices.size(); ++i)
    out.records.push_back(
        preprocess(p_matrices[i], cfg.out_frames, cfg.n_window, out.stats, labels[i]));
  return out;
}

inline std::string label_key(const Label& l) {
  return std::string(baseband::to_string(l.protocol)) + "/" + baseband::to_string(l.modulation) +
         "/" + std::to_string(static_cast<int>(l.snr_db)) + "/" + channel::to_string(l.mobility);
}

// Writes shards + manifest.json under out_dir; returns the manifest.
inline nlohmann::json generate_dataset(const GenConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  GeneratedSet set = generate_samples(cfg);

  std::map<std::string, std::size_t> counts;
  for (const auto& s : set.records) ++counts[label_key(s.label)];

  nlohmann::json manifest;
  manifest["format"] = "SGS1";
  manifest["version"] = kShardVersion;
  manifest["scenario_id"] = cfg.scenario_id;
  manifest["master_seed"] = cfg.master_seed;
  const nlohmann::json cfg_json = to_json(cfg);
  manifest["config"] = cfg_json;
  manifest["config_hash"] = hash_hex(config_hash(cfg_json));
  manifest["t"] = cfg.out_frames;
  manifest["k"] = cfg.n_window;
  manifest["c"] = 1;
  manifest["count"] = set.records.size();
  manifest["norm_stats"] = {{"mean", set.stats.mean},
                            {"std", set.stats.std},
                            {"epsilon", set.stats.epsilon}};
  nlohmann::json counts_json;
  for (const auto& [key, n] : counts) counts_json[key] = n;
  manifest["counts"] = counts_json;

  nlohmann::json shards = nlohmann::json::array();
  std::size_t written = 0, shard_idx = 0;
  while (written < set.records.size()) {
    const std::size_t n = std::min(cfg.shard_max_records, set.records.size() - written);
    std::vector<Spectrogram> chunk(set.records.begin() + static_cast<std::ptrdiff_t>(written),
                                   set.records.begin() + static_cast<std::ptrdiff_t>(written + n));
    char name[32];
    std::snprintf(name, sizeof(name), "shard-%03zu.sgs", shard_idx);
    write_shard((fs::path(out_dir) / name).string(), chunk);
    shards.push_back({{"file", name}, {"count", n}});
    written += n;
    ++shard_idx;
  }
  manifest["shards"] = shards;

  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest under " + out_dir);
  mf << manifest.dump(2) << "\n";
  return manifest;
}

struct Dataset {
  std::vector<Spectrogram> records;
  NormStats stats;
  std::size_t t = 0, k = 0, c = 1;
};

inline Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open " + manifest_path);
  nlohmann::json manifest = nlohmann::json::parse(f);
  Dataset d;
  d.t = manifest.at("t").get<std::size_t>();
  d.k = manifest.at("k").get<std::size_t>();
  d.c = manifest.at("c").get<std::size_t>();
  d.stats.mean = manifest.at("norm_stats").at("mean").get<double>();
  d.stats.std = manifest.at("norm_stats").at("std").get<double>();
  d.stats.epsilon = manifest.at("norm_stats").at("epsilon").get<double>();
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const auto& sh : manifest.at("shards")) {
    auto recs = read_shard((dir / sh.at("file").get<std::string>()).string());
    d.records.insert(d.records.end(), recs.begin(), recs.end());
  }
  if (d.records.size() != manifest.at("count").get<std::size_t>())
    throw TruncatedShard("record count does not match manifest");
  return d;
}

}  // namespace specforge::specgen
