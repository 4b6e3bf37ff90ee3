#include <gtest/gtest.h>

#include <complex>
#include <numeric>

#include "specforge/baseband/bits.hpp"
#include "specforge/baseband/constellation.hpp"
#include "specforge/baseband/frame.hpp"
#include "specforge/baseband/ofdm.hpp"
#include "specforge/baseband/pulse.hpp"

using namespace specforge;
using namespace specforge::baseband;

TEST(EncodeBits, IdentityCopies) {
  EXPECT_EQ(encode_bits({1, 0, 1}, CodeScheme::kIdentity), (BitVec{1, 0, 1}));
}

TEST(EncodeBits, Repeat2Duplicates) {
  EXPECT_EQ(encode_bits({1, 0}, CodeScheme::kRepeat2), (BitVec{1, 1, 0, 0}));
}

TEST(EncodeBits, Repeat2LengthAndRate) {
  const auto bits = random_bits(64, 7);
  const auto coded = encode_bits(bits, CodeScheme::kRepeat2);
  EXPECT_EQ(coded.size(), 128u);
  EXPECT_DOUBLE_EQ(code_rate(CodeScheme::kRepeat2), 0.5);
}

TEST(EncodeBits, RejectsNonBinary) {
  EXPECT_THROW(encode_bits({0, 2}, CodeScheme::kIdentity), InvalidBits);
}

TEST(Interleave, TwoByTwoTranspose) {
  EXPECT_EQ(interleave({'a', 'b', 'c', 'd'}, 2), (BitVec{'a', 'c', 'b', 'd'}));
}

TEST(Interleave, SingleRowIsIdentity) {
  const auto v = random_bits(32, 3);
  EXPECT_EQ(interleave(v, 1), v);
}

TEST(Interleave, InverseRoundtrip) {
  const auto v = random_bits(128, 99);
  for (std::size_t rows : {2u, 4u, 8u}) {
    EXPECT_EQ(deinterleave(interleave(v, rows), rows), v);
  }
}

TEST(Interleave, IsPermutation) {
  const auto v = random_bits(64, 5);
  auto mixed = interleave(v, 4);
  EXPECT_EQ(std::accumulate(mixed.begin(), mixed.end(), 0),
            std::accumulate(v.begin(), v.end(), 0));
}

TEST(Interleave, RejectsNonDivisible) { EXPECT_THROW(interleave({1, 0, 1}, 2), ShapeError); }

TEST(Constellation, BpskConvention) {
  const auto c = make_constellation(Modulation::kBpsk);
  const auto s = map_symbols({0, 1}, c);
  EXPECT_EQ(s[0], std::complex<double>(1.0, 0.0));
  EXPECT_EQ(s[1], std::complex<double>(-1.0, 0.0));
}

// brute-force average over all points is the energy oracle
TEST(Constellation, UnitMeanEnergyAllOrders) {
  for (auto mod : {Modulation::kBpsk, Modulation::kQpsk, Modulation::kQam16, Modulation::kQam64,
                   Modulation::kQam256}) {
    const auto c = make_constellation(mod);
    double e = 0.0;
    for (const auto& p : c.points) e += std::norm(p);
    EXPECT_NEAR(e / static_cast<double>(c.order), 1.0, 1e-12) << to_string(mod);
  }
}

TEST(Constellation, Qam16ScaleFactor) {
  // raw grid {+-1,+-3}^2 has mean energy 10 -> scale 1/sqrt(10)
  const auto c = make_constellation(Modulation::kQam16);
  double max_re = 0.0;
  for (const auto& p : c.points) max_re = std::max(max_re, p.real());
  EXPECT_NEAR(max_re, 3.0 / std::sqrt(10.0), 1e-12);
}

TEST(Constellation, Qam256ScaleFactor) {
  const auto c = make_constellation(Modulation::kQam256);
  double max_re = 0.0;
  for (const auto& p : c.points) max_re = std::max(max_re, p.real());
  EXPECT_NEAR(max_re, 15.0 / std::sqrt(170.0), 1e-12);
}

// axis-adjacent QAM points must differ in exactly one bit
TEST(Constellation, GrayLabelingAdjacency) {
  for (auto mod : {Modulation::kQpsk, Modulation::kQam16, Modulation::kQam64,
                   Modulation::kQam256}) {
    const auto c = make_constellation(mod);
    // grid step = 2*scale, where scale is the smallest level magnitude
    double scale = 1e9;
    for (const auto& p : c.points) scale = std::min(scale, std::abs(p.real()));
    for (unsigned a = 0; a < static_cast<unsigned>(c.order); ++a)
      for (unsigned b = a + 1; b < static_cast<unsigned>(c.order); ++b) {
        const auto d = c.points[a] - c.points[b];
        const bool adjacent =
            (std::abs(std::abs(d.real()) - 2.0 * scale) < 1e-9 && std::abs(d.imag()) < 1e-9) ||
            (std::abs(std::abs(d.imag()) - 2.0 * scale) < 1e-9 && std::abs(d.real()) < 1e-9);
        if (adjacent) {
          EXPECT_EQ(std::popcount(a ^ b), 1) << to_string(mod) << " labels " << a << "," << b;
        }
      }
  }
}

TEST(Constellation, MapDemapRoundtrip) {
  for (auto mod : {Modulation::kBpsk, Modulation::kQpsk, Modulation::kQam16, Modulation::kQam64,
                   Modulation::kQam256}) {
    const auto c = make_constellation(mod);
    const auto bits = random_bits(static_cast<std::size_t>(c.bits_per_symbol) * 20, 11);
    EXPECT_EQ(demap_symbols(map_symbols(bits, c), c), bits) << to_string(mod);
  }
}

TEST(Constellation, MapRejectsBadLength) {
  const auto c = make_constellation(Modulation::kQam16);
  EXPECT_THROW(map_symbols({1, 0, 1}, c), ShapeError);
}

TEST(RrcTaps, ZeroRolloffIsSinc) {
  const int n_os = 4;
  const auto g = rrc_taps(0.0, 8, n_os);
  const int center = static_cast<int>(g.size()) / 2;
  // at symbol spacing the sinc nulls: g[center + k*n_os] ~ 0 for k != 0
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(g[center + k * n_os] / g[center], 0.0, 1e-12);
}

TEST(RrcTaps, CenterIsGlobalMax) {
  const auto g = rrc_taps(0.25, 12, 4);
  const std::size_t center = g.size() / 2;
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(g[i], g[center] + 1e-15);
  EXPECT_EQ(g.size() % 2, 1u);
  // symmetric
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], g[g.size() - 1 - i], 1e-15);
}

TEST(RrcTaps, UnitEnergy) {
  const auto g = rrc_taps(0.25, 12, 4);
  double e = 0.0;
  for (double v : g) e += v * v;
  EXPECT_NEAR(e, 1.0, 1e-12);
}

// g*g sampled at symbol spacing ~ unit impulse (raised cosine is Nyquist);
// truncation error shrinks with span
TEST(RrcTaps, SelfConvolutionIsNyquist) {
  const int n_os = 4;
  const auto isi = [n_os](int span) {
    const auto g = rrc_taps(0.25, span, n_os);
    const int n = static_cast<int>(g.size());
    std::vector<double> rc(2 * n - 1, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) rc[i + j] += g[i] * g[j];
    const int center = n - 1;
    EXPECT_NEAR(rc[center], 1.0, 1e-3);
    double worst = 0.0;
    for (int k = 1; k < span - 1; ++k)
      worst = std::max(worst, std::abs(rc[center + k * n_os]));
    return worst;
  };
  EXPECT_LT(isi(12), 1e-2);
  EXPECT_LT(isi(16), 1e-3);
  EXPECT_LT(isi(24), 1e-3);
}

TEST(PulseShape, DeltaShaperIdentity) {
  PulseShaper delta{{1.0}, 1, 0.0};
  const auto x = pulse_shape({{1.0, 0.0}}, delta);
  ASSERT_EQ(x.size(), 1u);
  EXPECT_EQ(x.samples[0], std::complex<double>(1.0, 0.0));
}

TEST(PulseShape, Linearity) {
  const auto shaper = make_rrc_shaper(0.25, 4, 2);
  Rng rng(42);
  std::vector<std::complex<double>> s1(10), s2(10), sum(10);
  for (std::size_t i = 0; i < 10; ++i) {
    s1[i] = {rng.gauss(), rng.gauss()};
    s2[i] = {rng.gauss(), rng.gauss()};
    sum[i] = s1[i] + s2[i];
  }
  const auto x1 = pulse_shape(s1, shaper);
  const auto x2 = pulse_shape(s2, shaper);
  const auto xs = pulse_shape(sum, shaper);
  for (std::size_t n = 0; n < xs.size(); ++n)
    EXPECT_NEAR(std::abs(xs.samples[n] - x1.samples[n] - x2.samples[n]), 0.0, 1e-12);
}

TEST(PulseShape, LengthFormula) {
  // N_s=100, N_os=4, N_g=49 -> N_x = 99*4 + 49 = 445
  const auto shaper = make_rrc_shaper(0.25, 12, 4);
  ASSERT_EQ(shaper.taps.size(), 49u);
  std::vector<std::complex<double>> s(100, {1.0, 0.0});
  EXPECT_EQ(pulse_shape(s, shaper).size(), 445u);
}

TEST(PulseShape, ShiftCovariance) {
  const auto shaper = make_rrc_shaper(0.25, 4, 4);
  std::vector<std::complex<double>> a(8, {0.0, 0.0}), b(9, {0.0, 0.0});
  a[2] = {1.0, -0.5};
  b[3] = {1.0, -0.5};  // shifted by one symbol
  const auto xa = pulse_shape(a, shaper);
  const auto xb = pulse_shape(b, shaper);
  for (std::size_t n = 0; n < xa.size(); ++n)
    EXPECT_NEAR(std::abs(xb.samples[n + 4] - xa.samples[n]), 0.0, 1e-12);
}

TEST(Ofdm, SingleToneIsComplexExponential) {
  const std::size_t fft = 64, k0 = 5;
  std::vector<std::complex<double>> sym(fft, {0.0, 0.0});
  sym[k0] = {1.0, 0.0};
  const auto x = ofdm_modulate(sym, fft, 0);
  ASSERT_EQ(x.size(), fft);
  const double scale = 1.0 / std::sqrt(static_cast<double>(fft));
  for (std::size_t n = 0; n < fft; ++n) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k0 * n) / fft;
    EXPECT_NEAR(std::abs(x.samples[n] - scale * std::complex<double>(std::cos(ang), std::sin(ang))),
                0.0, 1e-12);
  }
}

TEST(Ofdm, CyclicPrefixCopiesTail) {
  const std::size_t fft = 64, cp = 16;
  Rng rng(5);
  std::vector<std::complex<double>> sym(2 * fft);
  for (auto& s : sym) s = {rng.gauss(), rng.gauss()};
  const auto x = ofdm_modulate(sym, fft, cp);
  ASSERT_EQ(x.size(), 2 * (fft + cp));
  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t base = b * (fft + cp);
    for (std::size_t i = 0; i < cp; ++i)
      EXPECT_EQ(x.samples[base + i], x.samples[base + fft + i]);
  }
}

TEST(Ofdm, UnitaryEnergyPreservation) {
  const std::size_t fft = 128;
  Rng rng(17);
  std::vector<std::complex<double>> sym(fft);
  double e_in = 0.0;
  for (auto& s : sym) {
    s = {rng.gauss(), rng.gauss()};
    e_in += std::norm(s);
  }
  const auto x = ofdm_modulate(sym, fft, 0);
  double e_out = 0.0;
  for (const auto& v : x.samples) e_out += std::norm(v);
  EXPECT_NEAR(e_out, e_in, 1e-12 * e_in);
}

TEST(Ofdm, RejectsBadSymbolCount) {
  std::vector<std::complex<double>> sym(65);
  EXPECT_THROW(ofdm_modulate(sym, 64, 16), ShapeError);
}

TEST(SynthesizeFrame, DeterministicPerSeed) {
  auto tpl = default_template(Protocol::kWifiLike);
  fit_frame_length(tpl, 2080);
  const Mcs mcs{Modulation::kQam16, CodeScheme::kRepeat2};
  const auto a = synthesize_frame(tpl, mcs, 1234);
  const auto b = synthesize_frame(tpl, mcs, 1234);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i], b.samples[i]);
  const auto c = synthesize_frame(tpl, mcs, 1235);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.samples[i] != c.samples[i]) any_diff = true;
  EXPECT_TRUE(any_diff);
}

TEST(SynthesizeFrame, PrependsPreamble) {
  auto tpl = default_template(Protocol::kWifiLike);
  fit_frame_length(tpl, 1000);
  const auto x = synthesize_frame(tpl, {Modulation::kQpsk, CodeScheme::kIdentity}, 7);
  // the first samples are the shaped preamble ramp; compare against a frame
  // with identical preamble but different payload seed
  const auto y = synthesize_frame(tpl, {Modulation::kQpsk, CodeScheme::kIdentity}, 8);
  const std::size_t guard = 8;  // well inside the preamble-only region
  for (std::size_t n = 0; n < guard; ++n) EXPECT_EQ(x.samples[n], y.samples[n]);
}

// Monte-Carlo over frames: mean power within 5% of unity
TEST(SynthesizeFrame, UnitMeanPower) {
  for (auto proto : {Protocol::kWifiLike, Protocol::kLteLike, Protocol::kNrLike}) {
    auto tpl = default_template(proto);
    fit_frame_length(tpl, 2080);
    double acc = 0.0;
    const int n_frames = 100;
    for (int f = 0; f < n_frames; ++f) {
      const auto x = synthesize_frame(tpl, {Modulation::kQam16, CodeScheme::kIdentity},
                                      1000 + static_cast<std::uint64_t>(f));
      acc += x.mean_power();
    }
    EXPECT_NEAR(acc / n_frames, 1.0, 0.05) << to_string(proto);
  }
}

TEST(SynthesizeFrame, ProtocolsDiffer) {
  auto wifi = default_template(Protocol::kWifiLike);
  auto lte = default_template(Protocol::kLteLike);
  EXPECT_EQ(wifi.carrier_mode, CarrierMode::kSingleCarrier);
  EXPECT_EQ(lte.carrier_mode, CarrierMode::kOfdm);
  fit_frame_length(wifi, 1000);
  fit_frame_length(lte, 1000);
  const auto xw = synthesize_frame(wifi, {Modulation::kQpsk, CodeScheme::kIdentity}, 3);
  const auto xl = synthesize_frame(lte, {Modulation::kQpsk, CodeScheme::kIdentity}, 3);
  EXPECT_NE(xw.size(), xl.size());
}

// encode(IDENTITY) -> interleave -> map -> demap -> deinterleave recovers bits
TEST(SynthesizeFrame, NoiselessChainRecoversBits) {
  const auto c = make_constellation(Modulation::kQam64);
  const auto bits = random_bits(6 * 32, 21);
  const auto coded = encode_bits(bits, CodeScheme::kIdentity);
  const auto mixed = interleave(coded, 4);
  const auto symbols = map_symbols(mixed, c);
  const auto back = deinterleave(demap_symbols(symbols, c), 4);
  EXPECT_EQ(back, bits);
}

// every modulation x code x protocol combination synthesizes cleanly
TEST(SynthesizeFrame, AllMcsCombinations) {
  for (auto proto : {Protocol::kWifiLike, Protocol::kLteLike, Protocol::kNrLike}) {
    auto tpl = default_template(proto);
    fit_frame_length(tpl, 2080);
    for (auto mod : {Modulation::kBpsk, Modulation::kQpsk, Modulation::kQam16,
                     Modulation::kQam64, Modulation::kQam256}) {
      for (auto code : {CodeScheme::kIdentity, CodeScheme::kRepeat2}) {
        FrameInfo info;
        const auto x = synthesize_frame(tpl, {mod, code}, 99, &info);
        EXPECT_GE(x.size(), 2080u);
        // coded length divides evenly into symbols and interleaver blocks
        const auto m = static_cast<std::size_t>(make_constellation(mod).bits_per_symbol);
        EXPECT_EQ(info.n_coded_bits % m, 0u) << to_string(proto) << " " << to_string(mod);
        EXPECT_EQ(info.n_coded_bits % 4, 0u);
        if (code == CodeScheme::kRepeat2) EXPECT_EQ(info.n_coded_bits, 2 * info.n_info_bits);
      }
    }
  }
}

TEST(FitFrameLength, SingleCarrierLengthCoversTarget) {
  auto tpl = default_template(Protocol::kWifiLike);
  fit_frame_length(tpl, 2080);
  EXPECT_GE(frame_sample_count(tpl), 2080u);
  // N_x = (N_s - 1) * N_os + N_g
  EXPECT_EQ(frame_sample_count(tpl),
            (tpl.frame_len_symbols - 1) * static_cast<std::size_t>(tpl.n_os) + rrc_tap_count(tpl));
}

TEST(FitFrameLength, OfdmGridDivisible) {
  auto tpl = default_template(Protocol::kNrLike);
  fit_frame_length(tpl, 2080);
  EXPECT_EQ(tpl.frame_len_symbols % tpl.fft_size, 0u);
  EXPECT_GE(frame_sample_count(tpl), 2080u);
}
