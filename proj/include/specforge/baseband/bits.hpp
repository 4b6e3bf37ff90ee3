#pragma once

#include <cstdint>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

namespace specforge::baseband {

using BitVec = std::vector<std::uint8_t>;

enum class CodeScheme { kIdentity, kRepeat2 };

inline double code_rate(CodeScheme s) { return s == CodeScheme::kIdentity ? 1.0 : 0.5; }

struct BitFrame {
  BitVec bits;    // B information bits
  BitVec coded;   // N_c coded bits
  double rate;    // B / N_c
};

inline void check_binary(const BitVec& bits) {
  for (auto b : bits) {
    if (b > 1) throw InvalidBits("bit value out of {0,1}");
  }
}

inline BitVec random_bits(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  BitVec out(count);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.below(2));
  return out;
}

// Rate-1 identity or rate-1/2 repetition code.
inline BitVec encode_bits(const BitVec& bits, CodeScheme scheme) {
  check_binary(bits);
  if (scheme == CodeScheme::kIdentity) return bits;
  BitVec out;
  out.reserve(bits.size() * 2);
  for (auto b : bits) {
    out.push_back(b);
    out.push_back(b);
  }
  return out;
}

// Row-major write / column-major read block interleaver.
inline BitVec interleave(const BitVec& coded, std::size_t rows) {
  if (rows == 0 || coded.size() % rows != 0)
    throw ShapeError("interleave: length not divisible by rows");
  const std::size_t cols = coded.size() / rows;
  BitVec out(coded.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) out[k++] = coded[r * cols + c];
  return out;
}

inline BitVec deinterleave(const BitVec& mixed, std::size_t rows) {
  if (rows == 0 || mixed.size() % rows != 0)
    throw ShapeError("deinterleave: length not divisible by rows");
  const std::size_t cols = mixed.size() / rows;
  BitVec out(mixed.size());
  std::size_t k = 0;
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = mixed[k++];
  return out;
}

inline BitFrame make_frame(std::size_t n_bits, CodeScheme scheme, std::uint64_t seed) {
  BitFrame f;
  f.bits = random_bits(n_bits, seed);
  f.coded = encode_bits(f.bits, scheme);
  f.rate = code_rate(scheme);
  return f;
}

}  // namespace specforge::baseband
