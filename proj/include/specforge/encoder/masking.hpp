#pragma once

#include <cstdint>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

namespace specforge::encoder {

struct MaskSpec {
  std::vector<std::size_t> mask_set;  // sorted, distinct, in [0, N)
  double ratio = 0.0;
  std::uint64_t seed = 0;
};

// Uniform sample without replacement of floor(ratio * N) indices.
inline MaskSpec sample_mask(std::size_t n_tokens, double ratio, std::uint64_t seed) {
  if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("sample_mask: ratio must be in [0, 1)");
  const auto count = static_cast<std::size_t>(ratio * static_cast<double>(n_tokens));
  Rng rng(seed);
  MaskSpec spec;
  spec.ratio = ratio;
  spec.seed = seed;
  spec.mask_set = rng.sample_without_replacement(n_tokens, count);
  return spec;
}

}  // namespace specforge::encoder
