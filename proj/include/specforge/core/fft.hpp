#pragma once

#include <bit>
#include <complex>
#include <numbers>
#include <vector>

#include "specforge/core/errors.hpp"

namespace specforge {

using cdouble = std::complex<double>;

// In-place iterative radix-2 FFT. Unscaled; callers apply 1/N or 1/sqrt(N).
inline void fft_radix2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!std::has_single_bit(n)) throw ShapeError("fft_radix2 requires power-of-two length");
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cdouble u = a[i + k];
        const cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Direct O(N^2) DFT, any length. Unscaled. Also serves as the FFT test oracle.
inline std::vector<cdouble> dft_direct(const std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  std::vector<cdouble> out(n, cdouble(0.0, 0.0));
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc(0.0, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * m % n) / static_cast<double>(n);
      acc += a[m] * cdouble(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Forward DFT of arbitrary length, radix-2 fast path.
inline std::vector<cdouble> dft(std::vector<cdouble> a, bool inverse = false) {
  if (std::has_single_bit(a.size())) {
    fft_radix2(a, inverse);
    return a;
  }
  return dft_direct(a, inverse);
}

}  // namespace specforge
