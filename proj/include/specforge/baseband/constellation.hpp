#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "specforge/baseband/bits.hpp"
#include "specforge/core/errors.hpp"

namespace specforge::baseband {

enum class Modulation : std::uint8_t { kBpsk = 0, kQpsk = 1, kQam16 = 2, kQam64 = 3, kQam256 = 4 };

inline const char* to_string(Modulation m) {
  switch (m) {
    case Modulation::kBpsk: return "BPSK";
    case Modulation::kQpsk: return "QPSK";
    case Modulation::kQam16: return "QAM16";
    case Modulation::kQam64: return "QAM64";
    case Modulation::kQam256: return "QAM256";
  }
  return "?";
}

inline Modulation modulation_from_string(const std::string& s) {
  if (s == "BPSK") return Modulation::kBpsk;
  if (s == "QPSK") return Modulation::kQpsk;
  if (s == "QAM16") return Modulation::kQam16;
  if (s == "QAM64") return Modulation::kQam64;
  if (s == "QAM256") return Modulation::kQam256;
  throw ConfigError("unknown modulation: " + s);
}

// Gray-labeled constellation, unit mean symbol energy.
// BPSK maps bit 0 -> +1, bit 1 -> -1. Square QAM uses per-axis Gray labels on
// the raw odd-integer grid {+-1, +-3, ...} scaled by 1/sqrt(mean energy); the
// first m/2 bits select the I level, the rest the Q level.
struct Constellation {
  int order = 2;                        // M
  int bits_per_symbol = 1;              // m = log2 M
  std::vector<std::complex<double>> points;  // indexed by the m-bit label

  std::complex<double> map_label(unsigned label) const { return points[label]; }

  // nearest-point hard decision; the infinite-SNR test oracle
  unsigned demap(std::complex<double> y) const {
    unsigned best = 0;
    double best_d = std::norm(y - points[0]);
    for (unsigned i = 1; i < points.size(); ++i) {
      const double d = std::norm(y - points[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }
};

namespace detail {
// Gray code of i; adjacent integers differ in one bit.
inline unsigned gray(unsigned i) { return i ^ (i >> 1); }

// level index 0..L-1 -> amplitude on the raw grid {-(L-1), ..., -1, +1, ..., L-1}
inline double grid_level(unsigned idx, unsigned levels) {
  return 2.0 * static_cast<double>(idx) - static_cast<double>(levels - 1);
}
}  // namespace detail

inline Constellation make_constellation(Modulation mod) {
  Constellation c;
  switch (mod) {
    case Modulation::kBpsk: c.order = 2; break;
    case Modulation::kQpsk: c.order = 4; break;
    case Modulation::kQam16: c.order = 16; break;
    case Modulation::kQam64: c.order = 64; break;
    case Modulation::kQam256: c.order = 256; break;
  }
  c.bits_per_symbol = static_cast<int>(std::lround(std::log2(c.order)));
  c.points.resize(c.order);
  if (mod == Modulation::kBpsk) {
    c.points[0] = {1.0, 0.0};
    c.points[1] = {-1.0, 0.0};
    return c;
  }
  const unsigned axis_bits = static_cast<unsigned>(c.bits_per_symbol) / 2;
  const unsigned levels = 1u << axis_bits;
  // mean energy of the raw grid: 2 * (L^2 - 1) / 3
  const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(levels) * levels - 1.0) / 3.0);
  for (unsigned label = 0; label < static_cast<unsigned>(c.order); ++label) {
    const unsigned i_bits = label >> axis_bits;
    const unsigned q_bits = label & (levels - 1);
    // invert the Gray map: find the level whose Gray code equals the bit group
    unsigned i_idx = 0, q_idx = 0;
    for (unsigned l = 0; l < levels; ++l) {
      if (detail::gray(l) == i_bits) i_idx = l;
      if (detail::gray(l) == q_bits) q_idx = l;
    }
    c.points[label] = {detail::grid_level(i_idx, levels) * scale,
                       detail::grid_level(q_idx, levels) * scale};
  }
  return c;
}

// Pack coded bits m at a time (MSB first) and map through the constellation.
inline std::vector<std::complex<double>> map_symbols(const BitVec& coded, const Constellation& c) {
  check_binary(coded);
  const std::size_t m = static_cast<std::size_t>(c.bits_per_symbol);
  if (coded.size() % m != 0) throw ShapeError("map_symbols: bit count not divisible by bits/symbol");
  std::vector<std::complex<double>> out(coded.size() / m);
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned label = 0;
    for (std::size_t b = 0; b < m; ++b) label = (label << 1) | coded[i * m + b];
    out[i] = c.map_label(label);
  }
  return out;
}

inline BitVec demap_symbols(const std::vector<std::complex<double>>& symbols, const Constellation& c) {
  const std::size_t m = static_cast<std::size_t>(c.bits_per_symbol);
  BitVec out(symbols.size() * m);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const unsigned label = c.demap(symbols[i]);
    for (std::size_t b = 0; b < m; ++b)
      out[i * m + b] = static_cast<std::uint8_t>((label >> (m - 1 - b)) & 1u);
  }
  return out;
}

}  // namespace specforge::baseband
