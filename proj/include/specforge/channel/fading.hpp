#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

namespace specforge::channel {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

enum class Mobility : std::uint8_t { kStatic = 0, kPedestrian = 1, kVehicular = 2 };

inline const char* to_string(Mobility m) {
  switch (m) {
    case Mobility::kStatic: return "STATIC";
    case Mobility::kPedestrian: return "PEDESTRIAN";
    case Mobility::kVehicular: return "VEHICULAR";
  }
  return "?";
}

inline Mobility mobility_from_string(const std::string& s) {
  if (s == "STATIC") return Mobility::kStatic;
  if (s == "PEDESTRIAN") return Mobility::kPedestrian;
  if (s == "VEHICULAR") return Mobility::kVehicular;
  throw ConfigError("unknown mobility: " + s);
}

struct MobilityClass {
  Mobility name = Mobility::kStatic;
  double speed_mps = 0.0;
  double carrier_hz = 3.5e9;
};

inline MobilityClass make_mobility(Mobility m, double carrier_hz = 3.5e9) {
  switch (m) {
    case Mobility::kStatic: return {m, 0.0, carrier_hz};
    case Mobility::kPedestrian: return {m, 1.5, carrier_hz};       // ~5.4 km/h
    case Mobility::kVehicular: return {m, 30.0 / 3.6, carrier_hz}; // 30 km/h
  }
  return {Mobility::kStatic, 0.0, carrier_hz};
}

inline double doppler_from_speed(const MobilityClass& mob) {
  if (mob.speed_mps < 0.0) throw ConfigError("doppler_from_speed: negative speed");
  return mob.speed_mps * mob.carrier_hz / kSpeedOfLight;
}

inline constexpr int kJakesRays = 32;

// Sum-of-sinusoids Rayleigh fading with random arrival angles and phases:
// alpha[n] = sqrt(1/N_r) * sum_r exp(j(2 pi f_D cos(theta_r) T_s n + phi_r)).
// Unit variance; ensemble autocorrelation approaches J0(2 pi f_D T_s dn).
// f_D = 0 degenerates to a constant unit-magnitude phasor.
inline std::vector<std::complex<double>> jakes_fading(double doppler_hz, double sample_period_s,
                                                      std::size_t length, std::uint64_t seed,
                                                      int n_rays = kJakesRays) {
  if (doppler_hz * sample_period_s >= 0.5)
    throw AliasError("jakes_fading: f_D * T_s must be < 0.5");
  Rng rng(seed);
  std::vector<std::complex<double>> alpha(length);
  if (doppler_hz == 0.0) {
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const std::complex<double> c(std::cos(phi), std::sin(phi));
    for (auto& a : alpha) a = c;
    return alpha;
  }
  std::vector<double> omega(n_rays), phase(n_rays);
  for (int r = 0; r < n_rays; ++r) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    omega[r] = 2.0 * std::numbers::pi * doppler_hz * std::cos(theta) * sample_period_s;
    phase[r] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double amp = 1.0 / std::sqrt(static_cast<double>(n_rays));
  for (std::size_t n = 0; n < length; ++n) {
    double re = 0.0, im = 0.0;
    for (int r = 0; r < n_rays; ++r) {
      const double a = omega[r] * static_cast<double>(n) + phase[r];
      re += std::cos(a);
      im += std::sin(a);
    }
    alpha[n] = {amp * re, amp * im};
  }
  return alpha;
}

struct FadingState {
  double doppler_hz = 0.0;
  double sample_period_s = 1.0;
  std::vector<std::vector<std::complex<double>>> per_tap;  // alpha_l[n]
  std::uint64_t seed = 0;
};

}  // namespace specforge::channel
