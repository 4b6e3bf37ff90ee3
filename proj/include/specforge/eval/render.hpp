#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include "specforge/core/errors.hpp"
#include "specforge/specgen/spectrogram.hpp"

namespace specforge::eval {

// Min-max scale to 0..255; a constant input maps to uniform gray 0.
inline std::vector<unsigned char> quantize_gray(const specgen::Spectrogram& s) {
  float lo = s.data[0], hi = s.data[0];
  for (float v : s.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<unsigned char> px(s.data.size());
  if (hi <= lo) return px;  // degenerate range -> all zeros
  const float scale = 255.0f / (hi - lo);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    px[i] = static_cast<unsigned char>(std::lround((s.data[i] - lo) * scale));
  return px;
}

// Binary PGM (P5), T rows x K columns.
inline void render_pgm(const specgen::Spectrogram& s, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  const auto px = quantize_gray(s);
  f << "P5\n" << s.k << " " << s.t << "\n255\n";
  f.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!f) throw IoError("short write to " + path);
}

struct PgmImage {
  std::size_t width = 0, height = 0;
  std::vector<unsigned char> pixels;
};

inline PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw BadMagic("not a P5 PGM");
  PgmImage img;
  std::size_t maxval = 0;
  f >> img.width >> img.height >> maxval;
  f.get();  // single whitespace after header
  img.pixels.resize(img.width * img.height);
  f.read(reinterpret_cast<char*>(img.pixels.data()),
         static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw TruncatedShard("PGM payload truncated");
  return img;
}

}  // namespace specforge::eval
