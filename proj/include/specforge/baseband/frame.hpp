#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "specforge/baseband/bits.hpp"
#include "specforge/baseband/constellation.hpp"
#include "specforge/baseband/ofdm.hpp"
#include "specforge/baseband/pulse.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"

#include <json.hpp>

namespace specforge::baseband {

enum class Protocol : std::uint8_t { kWifiLike = 0, kLteLike = 1, kNrLike = 2 };
enum class CarrierMode : std::uint8_t { kSingleCarrier = 0, kOfdm = 1 };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::kWifiLike: return "WIFI_LIKE";
    case Protocol::kLteLike: return "LTE_LIKE";
    case Protocol::kNrLike: return "NR_LIKE";
  }
  return "?";
}

inline Protocol protocol_from_string(const std::string& s) {
  if (s == "WIFI_LIKE") return Protocol::kWifiLike;
  if (s == "LTE_LIKE") return Protocol::kLteLike;
  if (s == "NR_LIKE") return Protocol::kNrLike;
  throw ConfigError("unknown protocol: " + s);
}

struct ProtocolTemplate {
  Protocol id = Protocol::kWifiLike;
  CarrierMode carrier_mode = CarrierMode::kSingleCarrier;
  int n_os = 4;
  double rolloff = 0.25;
  int rrc_span_symbols = 12;
  std::size_t fft_size = 64;           // OFDM only
  std::size_t cp_len = 16;             // OFDM only
  std::size_t active_subcarriers = 48; // OFDM only; contiguous band around DC
  std::size_t frame_len_symbols = 0;   // N_s; single-carrier: stream symbols, OFDM: full-grid symbols
  std::vector<std::complex<double>> preamble;  // fixed symbol prefix
};

// Fixed QPSK preamble pattern, seeded only by the protocol id.
inline std::vector<std::complex<double>> make_preamble(Protocol id, std::size_t length) {
  Rng rng(mix_seed(0x9ea4b1e5u, static_cast<std::uint64_t>(id)));
  const Constellation qpsk = make_constellation(Modulation::kQpsk);
  std::vector<std::complex<double>> p(length);
  for (auto& s : p) s = qpsk.map_label(static_cast<unsigned>(rng.below(4)));
  return p;
}

inline ProtocolTemplate default_template(Protocol id) {
  ProtocolTemplate t;
  t.id = id;
  switch (id) {
    case Protocol::kWifiLike:
      t.carrier_mode = CarrierMode::kSingleCarrier;
      t.n_os = 4;
      t.rolloff = 0.25;
      t.preamble = make_preamble(id, 16);
      t.frame_len_symbols = 256;
      break;
    case Protocol::kLteLike:
      t.carrier_mode = CarrierMode::kOfdm;
      t.fft_size = 64;
      t.cp_len = 16;
      t.active_subcarriers = 48;
      t.preamble = make_preamble(id, 32);
      t.frame_len_symbols = 256;
      break;
    case Protocol::kNrLike:
      t.carrier_mode = CarrierMode::kOfdm;
      t.fft_size = 128;
      t.cp_len = 9;
      t.active_subcarriers = 116;
      t.preamble = make_preamble(id, 48);
      t.frame_len_symbols = 512;
      break;
  }
  return t;
}

inline std::size_t rrc_tap_count(const ProtocolTemplate& t) {
  return static_cast<std::size_t>(t.rrc_span_symbols * t.n_os + 1);
}

// Samples the template produces before any truncation.
inline std::size_t frame_sample_count(const ProtocolTemplate& t) {
  if (t.carrier_mode == CarrierMode::kSingleCarrier)
    return (t.frame_len_symbols - 1) * static_cast<std::size_t>(t.n_os) + rrc_tap_count(t);
  return t.frame_len_symbols / t.fft_size * (t.fft_size + t.cp_len);
}

// Grow frame_len_symbols until the frame covers at least needed_samples.
inline void fit_frame_length(ProtocolTemplate& t, std::size_t needed_samples) {
  if (t.carrier_mode == CarrierMode::kSingleCarrier) {
    const std::size_t n_g = rrc_tap_count(t);
    std::size_t n_s = needed_samples > n_g
        ? (needed_samples - n_g + t.n_os - 1) / static_cast<std::size_t>(t.n_os) + 1
        : 1;
    if (n_s <= t.preamble.size()) n_s = t.preamble.size() + 1;
    t.frame_len_symbols = n_s;
  } else {
    const std::size_t per_block = t.fft_size + t.cp_len;
    std::size_t blocks = (needed_samples + per_block - 1) / per_block;
    while (blocks * t.active_subcarriers <= t.preamble.size()) ++blocks;
    t.frame_len_symbols = blocks * t.fft_size;
  }
}

inline nlohmann::json to_json(const ProtocolTemplate& t) {
  nlohmann::json j;
  j["id"] = to_string(t.id);
  j["carrier_mode"] = t.carrier_mode == CarrierMode::kSingleCarrier ? "SINGLE_CARRIER" : "OFDM";
  j["n_os"] = t.n_os;
  j["rolloff"] = t.rolloff;
  j["rrc_span_symbols"] = t.rrc_span_symbols;
  j["fft_size"] = t.fft_size;
  j["cp_len"] = t.cp_len;
  j["active_subcarriers"] = t.active_subcarriers;
  j["frame_len_symbols"] = t.frame_len_symbols;
  nlohmann::json pre = nlohmann::json::array();
  for (const auto& s : t.preamble) pre.push_back({s.real(), s.imag()});
  j["preamble"] = pre;
  return j;
}

inline ProtocolTemplate protocol_template_from_json(const nlohmann::json& j) {
  ProtocolTemplate t = default_template(protocol_from_string(j.at("id").get<std::string>()));
  if (j.contains("carrier_mode"))
    t.carrier_mode = j["carrier_mode"] == "OFDM" ? CarrierMode::kOfdm
                                                 : CarrierMode::kSingleCarrier;
  if (j.contains("n_os")) t.n_os = j["n_os"].get<int>();
  if (j.contains("rolloff")) t.rolloff = j["rolloff"].get<double>();
  if (j.contains("rrc_span_symbols")) t.rrc_span_symbols = j["rrc_span_symbols"].get<int>();
  if (j.contains("fft_size")) t.fft_size = j["fft_size"].get<std::size_t>();
  if (j.contains("cp_len")) t.cp_len = j["cp_len"].get<std::size_t>();
  if (j.contains("active_subcarriers"))
    t.active_subcarriers = j["active_subcarriers"].get<std::size_t>();
  if (j.contains("frame_len_symbols"))
    t.frame_len_symbols = j["frame_len_symbols"].get<std::size_t>();
  if (j.contains("preamble")) {
    t.preamble.clear();
    for (const auto& s : j["preamble"])
      t.preamble.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  if (t.carrier_mode == CarrierMode::kOfdm &&
      (t.active_subcarriers == 0 || t.active_subcarriers > t.fft_size))
    throw ConfigError("template: active_subcarriers out of range");
  return t;
}

struct Mcs {
  Modulation modulation = Modulation::kQpsk;
  CodeScheme code = CodeScheme::kIdentity;
};

struct FrameInfo {
  Protocol protocol;
  Modulation modulation;
  CodeScheme code;
  std::uint64_t seed = 0;
  std::size_t n_info_bits = 0;
  std::size_t n_coded_bits = 0;
  std::size_t n_symbols = 0;  // data symbols carried
};

namespace detail {
// Largest coded-bit count <= capacity_bits divisible by the interleaver
// depth, the symbol width and the code expansion; at least one block.
inline std::size_t usable_coded_bits(std::size_t capacity_bits, std::size_t rows,
                                     std::size_t bits_per_symbol, CodeScheme code) {
  std::size_t unit = std::lcm(rows, bits_per_symbol);
  if (code == CodeScheme::kRepeat2) unit = std::lcm(unit, std::size_t{2});
  if (capacity_bits < unit) return unit;
  return capacity_bits / unit * unit;
}

// j-th index of the contiguous active band [-a/2, a/2) in wrapped DFT order
inline std::size_t active_bin(std::size_t j, std::size_t fft_size, std::size_t active) {
  return (fft_size - active / 2 + j) % fft_size;
}
}  // namespace detail

// Bits -> code -> interleave -> Gray map -> (pulse shaping | OFDM grid).
// Deterministic per seed; the preamble occupies the first symbol slots and
// slots past the coded payload cycle through the preamble pattern. Output is
// scaled to unit mean power in expectation.
inline ComplexSignal synthesize_frame(const ProtocolTemplate& t, const Mcs& mcs,
                                      std::uint64_t seed, FrameInfo* info = nullptr,
                                      std::size_t interleaver_rows = 4) {
  const Constellation con = make_constellation(mcs.modulation);
  const std::size_t m = static_cast<std::size_t>(con.bits_per_symbol);

  const std::size_t slots = t.carrier_mode == CarrierMode::kSingleCarrier
      ? t.frame_len_symbols
      : t.frame_len_symbols / t.fft_size * t.active_subcarriers;
  if (slots <= t.preamble.size())
    throw ShapeError("synthesize_frame: frame too short for the preamble");
  const std::size_t data_slots = slots - t.preamble.size();

  const std::size_t n_coded =
      detail::usable_coded_bits(data_slots * m, interleaver_rows, m, mcs.code);
  if (n_coded / m > data_slots)
    throw ShapeError("synthesize_frame: frame too short for one coded block");
  const std::size_t n_info = mcs.code == CodeScheme::kRepeat2 ? n_coded / 2 : n_coded;

  BitFrame frame = make_frame(n_info, mcs.code, mix_seed(seed, 0x1));
  const BitVec mixed = interleave(frame.coded, interleaver_rows);
  const auto data_symbols = map_symbols(mixed, con);

  std::vector<std::complex<double>> stream;
  stream.reserve(slots);
  stream.insert(stream.end(), t.preamble.begin(), t.preamble.end());
  stream.insert(stream.end(), data_symbols.begin(), data_symbols.end());
  for (std::size_t j = 0; stream.size() < slots; ++j)
    stream.push_back(t.preamble[j % t.preamble.size()]);

  ComplexSignal x;
  if (t.carrier_mode == CarrierMode::kSingleCarrier) {
    const PulseShaper shaper = make_rrc_shaper(t.rolloff, t.rrc_span_symbols, t.n_os);
    x = pulse_shape(stream, shaper);
    const double gain = std::sqrt(static_cast<double>(t.n_os));
    for (auto& v : x.samples) v *= gain;
  } else {
    const std::size_t blocks = t.frame_len_symbols / t.fft_size;
    std::vector<std::complex<double>> grid(t.frame_len_symbols, {0.0, 0.0});
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t j = 0; j < t.active_subcarriers; ++j)
        grid[b * t.fft_size + detail::active_bin(j, t.fft_size, t.active_subcarriers)] =
            stream[b * t.active_subcarriers + j];
    x = ofdm_modulate(grid, t.fft_size, t.cp_len);
    const double gain = std::sqrt(static_cast<double>(t.fft_size) /
                                  static_cast<double>(t.active_subcarriers));
    for (auto& v : x.samples) v *= gain;
  }
  x.origin_seed = seed;
  if (info) {
    info->protocol = t.id;
    info->modulation = mcs.modulation;
    info->code = mcs.code;
    info->seed = seed;
    info->n_info_bits = n_info;
    info->n_coded_bits = n_coded;
    info->n_symbols = data_symbols.size();
  }
  return x;
}

}  // namespace specforge::baseband
