#pragma once

#include <cstddef>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/specgen/spectrogram.hpp"

namespace specforge::encoder {

struct PatchGrid {
  std::size_t patch = 4;   // P
  std::size_t rows = 0;    // T / P
  std::size_t cols = 0;    // K / P
  std::size_t n() const { return rows * cols; }
  std::size_t dim() const { return patch * patch; }
};

// Non-overlapping P x P patches in time-major order; each patch flattened
// row-major. Returns N x P^2 values.
template <class Real>
std::vector<Real> patchify(const std::vector<float>& data, std::size_t t, std::size_t k,
                           std::size_t patch, PatchGrid* grid_out = nullptr) {
  if (patch == 0 || t % patch != 0 || k % patch != 0)
    throw ShapeError("patchify: T and K must be divisible by P");
  PatchGrid grid{patch, t / patch, k / patch};
  std::vector<Real> out(grid.n() * grid.dim());
  for (std::size_t gt = 0; gt < grid.rows; ++gt)
    for (std::size_t gk = 0; gk < grid.cols; ++gk) {
      const std::size_t p_idx = gt * grid.cols + gk;
      for (std::size_t i = 0; i < patch; ++i)
        for (std::size_t j = 0; j < patch; ++j)
          out[p_idx * grid.dim() + i * patch + j] =
              static_cast<Real>(data[(gt * patch + i) * k + (gk * patch + j)]);
    }
  if (grid_out) *grid_out = grid;
  return out;
}

template <class Real>
std::vector<Real> patchify(const specgen::Spectrogram& s, std::size_t patch,
                           PatchGrid* grid_out = nullptr) {
  return patchify<Real>(s.data, s.t, s.k, patch, grid_out);
}

template <class Real>
std::vector<float> unpatchify(const std::vector<Real>& patches, const PatchGrid& grid) {
  if (patches.size() != grid.n() * grid.dim()) throw ShapeError("unpatchify: size mismatch");
  std::vector<float> out(grid.rows * grid.patch * grid.cols * grid.patch);
  const std::size_t k = grid.cols * grid.patch;
  for (std::size_t gt = 0; gt < grid.rows; ++gt)
    for (std::size_t gk = 0; gk < grid.cols; ++gk) {
      const std::size_t p_idx = gt * grid.cols + gk;
      for (std::size_t i = 0; i < grid.patch; ++i)
        for (std::size_t j = 0; j < grid.patch; ++j)
          out[(gt * grid.patch + i) * k + (gk * grid.patch + j)] =
              static_cast<float>(patches[p_idx * grid.dim() + i * grid.patch + j]);
    }
  return out;
}

}  // namespace specforge::encoder
