#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specforge/baseband/constellation.hpp"
#include "specforge/baseband/frame.hpp"
#include "specforge/channel/fading.hpp"
#include "specforge/core/errors.hpp"

namespace specforge::specgen {

struct Label {
  baseband::Protocol protocol = baseband::Protocol::kWifiLike;
  baseband::Modulation modulation = baseband::Modulation::kBpsk;
  channel::Mobility mobility = channel::Mobility::kStatic;
  float snr_db = 0.0f;
  std::uint64_t seed = 0;
  std::string scenario_id;
};

// T x K x C real tensor (C = 1) with its label block.
struct Spectrogram {
  std::size_t t = 0, k = 0, c = 1;
  std::vector<float> data;  // row-major [t][k]
  Label label;
  bool normalized = false;

  float& at(std::size_t ti, std::size_t ki) { return data[ti * k + ki]; }
  float at(std::size_t ti, std::size_t ki) const { return data[ti * k + ki]; }
};

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
  double epsilon = 1e-12;  // log floor
};

inline constexpr double kStdFloor = 1e-6;

// Mean/population-std of log10(P + eps) over every entry of the sample.
inline NormStats fit_norm_stats(const std::vector<std::vector<double>>& p_matrices,
                                double epsilon = 1e-12) {
  NormStats s;
  s.epsilon = epsilon;
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& p : p_matrices) {
    for (double v : p) sum += std::log10(v + epsilon);
    count += p.size();
  }
  if (count == 0) throw ShapeError("fit_norm_stats: empty sample");
  s.mean = sum / static_cast<double>(count);
  double var = 0.0;
  for (const auto& p : p_matrices)
    for (double v : p) {
      const double d = std::log10(v + epsilon) - s.mean;
      var += d * d;
    }
  s.std = std::sqrt(var / static_cast<double>(count));
  if (s.std < kStdFloor) s.std = kStdFloor;
  return s;
}

// S = (log10(P + eps) - mean) / std, arranged T x K x 1.
inline Spectrogram preprocess(const std::vector<double>& p, std::size_t frames, std::size_t bins,
                              const NormStats& stats, const Label& label = {}) {
  if (stats.std <= 0.0) throw ConfigError("preprocess: std must be > 0");
  if (p.size() != frames * bins) throw ShapeError("preprocess: bad P dimensions");
  Spectrogram s;
  s.t = frames;
  s.k = bins;
  s.c = 1;
  s.label = label;
  s.normalized = true;
  s.data.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    s.data[i] = static_cast<float>((std::log10(p[i] + stats.epsilon) - stats.mean) / stats.std);
  return s;
}

// Mean |S[t+1,k] - S[t,k]|; the Doppler-visibility statistic.
inline double temporal_variation(const Spectrogram& s) {
  if (s.t < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < s.t; ++t)
    for (std::size_t k = 0; k < s.k; ++k) acc += std::abs(s.at(t + 1, k) - s.at(t, k));
  return acc / static_cast<double>((s.t - 1) * s.k);
}

}  // namespace specforge::specgen
