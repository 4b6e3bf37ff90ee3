#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "specforge/core/errors.hpp"

namespace specforge::baseband {

struct ComplexSignal {
  std::vector<std::complex<double>> samples;
  double sample_rate_hz = 1.0;
  std::uint64_t origin_seed = 0;

  std::size_t size() const { return samples.size(); }
  double mean_power() const {
    double p = 0.0;
    for (const auto& s : samples) p += std::norm(s);
    return samples.empty() ? 0.0 : p / static_cast<double>(samples.size());
  }
};

struct PulseShaper {
  std::vector<double> taps;  // unit energy, odd length
  int oversampling = 4;      // N_os
  double rolloff = 0.25;     // beta
};

// Root-raised-cosine impulse response sampled at N_os samples per symbol,
// span_symbols symbols wide, normalized to unit energy. The removable
// singularities at t=0 and t=+-1/(4 beta) use their analytic limits.
inline std::vector<double> rrc_taps(double rolloff, int span_symbols, int n_os) {
  if (rolloff < 0.0 || rolloff > 1.0) throw ConfigError("rrc_taps: rolloff out of [0,1]");
  if (span_symbols < 4) throw ConfigError("rrc_taps: span must be >= 4 symbols");
  if (n_os < 2) throw ConfigError("rrc_taps: oversampling must be >= 2");
  const int half = span_symbols * n_os / 2;
  std::vector<double> g(static_cast<std::size_t>(2 * half + 1));
  const double pi = std::numbers::pi;
  for (int n = -half; n <= half; ++n) {
    const double t = static_cast<double>(n) / n_os;  // in symbol periods
    double v;
    if (n == 0) {
      v = 1.0 - rolloff + 4.0 * rolloff / pi;
    } else if (rolloff > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * rolloff)) < 1e-12) {
      v = rolloff / std::sqrt(2.0) *
          ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * rolloff)) +
           (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * rolloff)));
    } else {
      const double num = std::sin(pi * t * (1.0 - rolloff)) +
                         4.0 * rolloff * t * std::cos(pi * t * (1.0 + rolloff));
      const double den = pi * t * (1.0 - 16.0 * rolloff * rolloff * t * t);
      v = num / den;
    }
    g[static_cast<std::size_t>(n + half)] = v;
  }
  double energy = 0.0;
  for (double v : g) energy += v * v;
  const double inv = 1.0 / std::sqrt(energy);
  for (double& v : g) v *= inv;
  return g;
}

inline PulseShaper make_rrc_shaper(double rolloff, int span_symbols, int n_os) {
  return PulseShaper{rrc_taps(rolloff, span_symbols, n_os), n_os, rolloff};
}

// x[n] = sum_i s[i] g[n - i*N_os] with causal taps g[0..N_g-1];
// output length N_x = (N_s - 1) * N_os + N_g.
inline ComplexSignal pulse_shape(const std::vector<std::complex<double>>& symbols,
                                 const PulseShaper& shaper) {
  const std::size_t n_g = shaper.taps.size();
  const std::size_t n_s = symbols.size();
  ComplexSignal out;
  if (n_s == 0) return out;
  out.samples.assign((n_s - 1) * static_cast<std::size_t>(shaper.oversampling) + n_g,
                     std::complex<double>(0.0, 0.0));
  for (std::size_t i = 0; i < n_s; ++i) {
    const std::size_t base = i * static_cast<std::size_t>(shaper.oversampling);
    const std::complex<double> s = symbols[i];
    for (std::size_t k = 0; k < n_g; ++k) out.samples[base + k] += s * shaper.taps[k];
  }
  return out;
}

}  // namespace specforge::baseband
