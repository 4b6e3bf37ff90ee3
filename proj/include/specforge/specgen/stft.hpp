#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "specforge/baseband/pulse.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/fft.hpp"

namespace specforge::specgen {

using baseband::ComplexSignal;

struct StftConfig {
  std::vector<double> window;  // w[m], length N_w
  std::size_t hop = 32;        // R
  std::size_t kept_bins = 0;   // K; 0 means all N_w bins

  std::size_t n_window() const { return window.size(); }
  std::size_t k() const { return kept_bins == 0 ? window.size() : kept_bins; }
};

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t m = 0; m < n; ++m)
    w[m] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(m) /
                                 static_cast<double>(n)));
  return w;
}

inline std::vector<double> rect_window(std::size_t n) { return std::vector<double>(n, 1.0); }

inline StftConfig make_stft_config(std::size_t n_window, std::size_t hop,
                                   const std::string& window = "hann",
                                   std::size_t kept_bins = 0) {
  if (hop == 0 || hop > n_window) throw ConfigError("stft: hop must be in [1, N_w]");
  if (kept_bins > n_window) throw ConfigError("stft: kept_bins > N_w");
  StftConfig cfg;
  cfg.window = window == "rect" ? rect_window(n_window) : hann_window(n_window);
  cfg.hop = hop;
  cfg.kept_bins = kept_bins;
  return cfg;
}

inline std::size_t frame_count(std::size_t n_samples, std::size_t n_window, std::size_t hop) {
  if (n_samples < n_window) throw SignalTooShort("stft: signal shorter than the window");
  return (n_samples - n_window) / hop + 1;
}

// Y[t,k] = sum_m y[tR+m] w[m] e^{-j 2 pi k m / N_w}; T frames, no padding.
// Row-major T x N_w.
inline std::vector<cdouble> stft(const ComplexSignal& y, const StftConfig& cfg,
                                 std::size_t* out_frames = nullptr) {
  const std::size_t n_w = cfg.n_window();
  const std::size_t frames = frame_count(y.size(), n_w, cfg.hop);
  std::vector<cdouble> out(frames * n_w);
  std::vector<cdouble> buf(n_w);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t base = t * cfg.hop;
    for (std::size_t m = 0; m < n_w; ++m) buf[m] = y.samples[base + m] * cfg.window[m];
    const auto spec = dft(buf, /*inverse=*/false);
    std::copy(spec.begin(), spec.end(), out.begin() + static_cast<std::ptrdiff_t>(t * n_w));
  }
  if (out_frames) *out_frames = frames;
  return out;
}

// P[t,k] = |Y[t,k]|^2, truncated to the first K bins. Row-major T x K.
inline std::vector<double> power(const std::vector<cdouble>& y_tk, std::size_t frames,
                                 std::size_t n_w, std::size_t kept_bins) {
  if (kept_bins > n_w) throw ShapeError("power: kept_bins > N_w");
  std::vector<double> p(frames * kept_bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < kept_bins; ++k) p[t * kept_bins + k] = std::norm(y_tk[t * n_w + k]);
  return p;
}

inline std::vector<double> power_spectrogram(const ComplexSignal& y, const StftConfig& cfg,
                                             std::size_t* out_frames = nullptr) {
  std::size_t frames = 0;
  const auto y_tk = stft(y, cfg, &frames);
  if (out_frames) *out_frames = frames;
  return power(y_tk, frames, cfg.n_window(), cfg.k());
}

}  // namespace specforge::specgen
