#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "specforge/baseband/pulse.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/fft.hpp"

namespace specforge::baseband {

// Per block of fft_size symbols: unitary IDFT, then a cyclic prefix of
// cp_len samples copied from the block tail.
inline ComplexSignal ofdm_modulate(const std::vector<std::complex<double>>& symbols,
                                   std::size_t fft_size, std::size_t cp_len) {
  if (fft_size == 0 || symbols.size() % fft_size != 0)
    throw ShapeError("ofdm_modulate: symbol count not divisible by fft_size");
  if (cp_len > fft_size) throw ShapeError("ofdm_modulate: cp longer than fft_size");
  const std::size_t n_blocks = symbols.size() / fft_size;
  ComplexSignal out;
  out.samples.reserve(n_blocks * (fft_size + cp_len));
  const double scale = 1.0 / std::sqrt(static_cast<double>(fft_size));
  std::vector<cdouble> block(fft_size);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    for (std::size_t k = 0; k < fft_size; ++k) block[k] = symbols[b * fft_size + k];
    std::vector<cdouble> time = dft(block, /*inverse=*/true);
    for (auto& v : time) v *= scale;
    for (std::size_t i = fft_size - cp_len; i < fft_size; ++i) out.samples.push_back(time[i]);
    out.samples.insert(out.samples.end(), time.begin(), time.end());
  }
  return out;
}

}  // namespace specforge::baseband
