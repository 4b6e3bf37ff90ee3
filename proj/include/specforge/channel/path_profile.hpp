#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

#include <json.hpp>

namespace specforge::channel {

struct PathProfile {
  std::vector<double> delays_s;  // nondecreasing
  std::vector<double> powers;    // positive, sums to 1
  std::string scenario_id;

  std::size_t n_paths() const { return delays_s.size(); }
};

inline void validate(const PathProfile& p) {
  if (p.delays_s.empty() || p.delays_s.size() != p.powers.size())
    throw ShapeError("path profile: delays/powers size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.n_paths(); ++i) {
    if (p.powers[i] <= 0.0) throw ConfigError("path profile: nonpositive power");
    if (p.delays_s[i] < 0.0) throw ConfigError("path profile: negative delay");
    if (i > 0 && p.delays_s[i] < p.delays_s[i - 1])
      throw ConfigError("path profile: delays not nondecreasing");
    sum += p.powers[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("path profile: powers do not sum to 1");
}

// Procedural stand-in for ray-tracing multipath: delays uniform in
// [0, delay_spread], powers on an exponential-decay-with-delay profile,
// normalized. Deterministic per seed.
inline PathProfile gen_scenario(std::uint64_t seed, std::size_t n_paths, double delay_spread_s,
                                double decay_db, const std::string& scenario_id = "procedural") {
  if (n_paths == 0) throw ConfigError("gen_scenario: n_paths must be >= 1");
  Rng rng(seed);
  PathProfile p;
  p.scenario_id = scenario_id;
  p.delays_s.resize(n_paths);
  for (auto& d : p.delays_s) d = rng.uniform(0.0, delay_spread_s);
  std::sort(p.delays_s.begin(), p.delays_s.end());
  p.delays_s[0] = 0.0;  // line-of-sight reference
  p.powers.resize(n_paths);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    const double frac = delay_spread_s > 0.0 ? p.delays_s[i] / delay_spread_s : 0.0;
    p.powers[i] = std::pow(10.0, -decay_db * frac / 10.0);
    sum += p.powers[i];
  }
  for (auto& w : p.powers) w /= sum;
  return p;
}

struct DiscreteTap {
  std::size_t index;  // delay in samples
  double power;
};

// Round each delay to the nearest sample, merge coincident taps by summing
// powers, renormalize to sum 1.
inline std::vector<DiscreteTap> discretize_delays(const PathProfile& p, double sample_period_s) {
  if (sample_period_s <= 0.0) throw ConfigError("discretize_delays: sample period must be > 0");
  std::vector<DiscreteTap> taps;
  for (std::size_t i = 0; i < p.n_paths(); ++i) {
    const auto idx = static_cast<std::size_t>(std::llround(p.delays_s[i] / sample_period_s));
    bool merged = false;
    for (auto& t : taps) {
      if (t.index == idx) {
        t.power += p.powers[i];
        merged = true;
        break;
      }
    }
    if (!merged) taps.push_back({idx, p.powers[i]});
  }
  std::sort(taps.begin(), taps.end(),
            [](const DiscreteTap& a, const DiscreteTap& b) { return a.index < b.index; });
  double sum = 0.0;
  for (const auto& t : taps) sum += t.power;
  for (auto& t : taps) t.power /= sum;
  return taps;
}

// JSON hook for externally supplied (e.g. ray-traced) profiles.
inline nlohmann::json to_json(const PathProfile& p) {
  return nlohmann::json{{"scenario_id", p.scenario_id},
                        {"delays_s", p.delays_s},
                        {"powers", p.powers}};
}

inline PathProfile path_profile_from_json(const nlohmann::json& j) {
  PathProfile p;
  p.scenario_id = j.at("scenario_id").get<std::string>();
  p.delays_s = j.at("delays_s").get<std::vector<double>>();
  p.powers = j.at("powers").get<std::vector<double>>();
  validate(p);
  return p;
}

}  // namespace specforge::channel
