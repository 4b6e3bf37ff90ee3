#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <vector>

#include "specforge/baseband/pulse.hpp"
#include "specforge/channel/fading.hpp"
#include "specforge/channel/path_profile.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

namespace specforge::channel {

using baseband::ComplexSignal;

// Immutable per-frame channel: h_l[n] = sqrt(p_l) * alpha_l[n] on integer
// tap delays, plus the AWGN working point.
struct ChannelRealization {
  std::vector<std::size_t> tap_indices;
  std::vector<std::vector<std::complex<double>>> tap_gains;  // h_l[n], length >= signal
  double noise_var = 0.0;
  double snr_db = std::numeric_limits<double>::infinity();
};

inline ChannelRealization make_realization(const PathProfile& profile, const MobilityClass& mob,
                                           double sample_rate_hz, std::size_t length,
                                           std::uint64_t seed, double snr_db) {
  const double t_s = 1.0 / sample_rate_hz;
  const auto taps = discretize_delays(profile, t_s);
  const double doppler = doppler_from_speed(mob);
  ChannelRealization r;
  r.snr_db = snr_db;
  r.tap_indices.reserve(taps.size());
  r.tap_gains.reserve(taps.size());
  for (std::size_t l = 0; l < taps.size(); ++l) {
    auto alpha = jakes_fading(doppler, t_s, length, mix_seed(seed, l));
    const double g = std::sqrt(taps[l].power);
    for (auto& a : alpha) a *= g;
    r.tap_indices.push_back(taps[l].index);
    r.tap_gains.push_back(std::move(alpha));
  }
  return r;
}

// y[n] = sum_l h_l[n] x[n - d_l], x[m] = 0 for m < 0; output length = input length.
inline ComplexSignal apply_tdl(const ComplexSignal& x, const ChannelRealization& r) {
  const std::size_t n = x.size();
  for (const auto& g : r.tap_gains)
    if (g.size() < n) throw ShapeError("apply_tdl: tap gains shorter than signal");
  ComplexSignal y;
  y.sample_rate_hz = x.sample_rate_hz;
  y.origin_seed = x.origin_seed;
  y.samples.assign(n, {0.0, 0.0});
  for (std::size_t l = 0; l < r.tap_indices.size(); ++l) {
    const std::size_t d = r.tap_indices[l];
    const auto& h = r.tap_gains[l];
    for (std::size_t i = d; i < n; ++i) y.samples[i] += h[i] * x.samples[i - d];
  }
  return y;
}

// Circularly-symmetric complex Gaussian noise, unit variance scaled by sigma.
inline std::vector<std::complex<double>> awgn_noise(std::size_t length, double sigma,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::complex<double>> w(length);
  const double s = sigma / std::sqrt(2.0);
  for (auto& v : w) {
    const double re = rng.gauss();
    const double im = rng.gauss();
    v = {s * re, s * im};
  }
  return w;
}

inline double noise_variance_for(const ComplexSignal& y, double snr_db) {
  const double power = y.mean_power();
  if (power <= 0.0) throw ZeroSignal("add_awgn: zero-power signal");
  return power / std::pow(10.0, snr_db / 10.0);
}

// sigma_w^2 = mean|y|^2 / 10^(snr/10); +inf SNR is the no-noise sentinel.
inline ComplexSignal add_awgn(const ComplexSignal& y, double snr_db, std::uint64_t seed) {
  if (y.size() == 0) throw ZeroSignal("add_awgn: empty signal");
  if (std::isinf(snr_db) && snr_db > 0.0) return y;
  const double var = noise_variance_for(y, snr_db);
  const auto w = awgn_noise(y.size(), std::sqrt(var), seed);
  ComplexSignal out;
  out.sample_rate_hz = y.sample_rate_hz;
  out.origin_seed = y.origin_seed;
  out.samples.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out.samples[i] = y.samples[i] + w[i];
  return out;
}

}  // namespace specforge::channel
