#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "specforge/channel/fading.hpp"
#include "specforge/channel/path_profile.hpp"
#include "specforge/channel/tdl.hpp"

using namespace specforge;
using namespace specforge::channel;

TEST(GenScenario, SinglePathNormalized) {
  const auto p = gen_scenario(1, 1, 2e-6, 10.0);
  ASSERT_EQ(p.n_paths(), 1u);
  EXPECT_DOUBLE_EQ(p.powers[0], 1.0);
  EXPECT_DOUBLE_EQ(p.delays_s[0], 0.0);
}

TEST(GenScenario, PowersSumToOne) {
  for (std::uint64_t seed : {1ull, 7ull, 123ull, 99999ull}) {
    const auto p = gen_scenario(seed, 6, 4e-6, 12.0);
    double sum = 0.0;
    for (double w : p.powers) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    validate(p);
  }
}

TEST(GenScenario, DeterministicPerSeed) {
  const auto a = gen_scenario(42, 4, 2e-6, 10.0);
  const auto b = gen_scenario(42, 4, 2e-6, 10.0);
  EXPECT_EQ(a.delays_s, b.delays_s);
  EXPECT_EQ(a.powers, b.powers);
}

TEST(DiscretizeDelays, NearestRounding) {
  PathProfile p;
  const double ts = 1e-6;
  p.delays_s = {0.0, 2.4e-6, 2.6e-6};
  p.powers = {0.5, 0.25, 0.25};
  p.scenario_id = "t";
  const auto taps = discretize_delays(p, ts);
  ASSERT_EQ(taps.size(), 3u);
  EXPECT_EQ(taps[0].index, 0u);
  EXPECT_EQ(taps[1].index, 2u);
  EXPECT_EQ(taps[2].index, 3u);
  EXPECT_NEAR(taps[0].power, 0.5, 1e-12);
  EXPECT_NEAR(taps[1].power, 0.25, 1e-12);
  EXPECT_NEAR(taps[2].power, 0.25, 1e-12);
}

TEST(DiscretizeDelays, MergesCoincidentTaps) {
  PathProfile p;
  p.delays_s = {0.0, 0.4e-6};
  p.powers = {0.7, 0.3};
  p.scenario_id = "t";
  const auto taps = discretize_delays(p, 1e-6);
  ASSERT_EQ(taps.size(), 1u);
  EXPECT_EQ(taps[0].index, 0u);
  EXPECT_NEAR(taps[0].power, 1.0, 1e-12);
}

TEST(DiscretizeDelays, AllZeroDelays) {
  PathProfile p;
  p.delays_s = {0.0, 0.0, 0.0};
  p.powers = {0.2, 0.3, 0.5};
  p.scenario_id = "t";
  const auto taps = discretize_delays(p, 1e-6);
  ASSERT_EQ(taps.size(), 1u);
  EXPECT_NEAR(taps[0].power, 1.0, 1e-12);
}

TEST(Doppler, ZeroSpeedZeroDoppler) {
  EXPECT_DOUBLE_EQ(doppler_from_speed(make_mobility(Mobility::kStatic)), 0.0);
}

TEST(Doppler, ThirtyKmhAt3p5GHz) {
  // (30/3.6) m/s * 3.5e9 / 2.99792458e8 = 97.2895... Hz
  const auto mob = make_mobility(Mobility::kVehicular, 3.5e9);
  const double oracle = (30.0 / 3.6) * 3.5e9 / 2.99792458e8;
  EXPECT_NEAR(doppler_from_speed(mob), oracle, 1e-9);
  EXPECT_NEAR(oracle, 97.29, 0.01);
}

TEST(Doppler, LinearInSpeed) {
  MobilityClass a{Mobility::kPedestrian, 5.0, 2e9};
  MobilityClass b{Mobility::kPedestrian, 10.0, 2e9};
  EXPECT_NEAR(2.0 * doppler_from_speed(a), doppler_from_speed(b), 1e-12);
}

TEST(JakesFading, ZeroDopplerConstantUnitMagnitude) {
  const auto alpha = jakes_fading(0.0, 1e-6, 64, 5);
  for (const auto& a : alpha) {
    EXPECT_NEAR(std::abs(a), 1.0, 1e-12);
    EXPECT_EQ(a, alpha[0]);
  }
}

TEST(JakesFading, ThrowsOnAliasing) {
  EXPECT_THROW(jakes_fading(600.0, 1e-3, 16, 1), AliasError);
}

// Monte-Carlo unit variance over 2000 seeds
TEST(JakesFading, UnitVariance) {
  const double fd = 100.0, ts = 1e-5;
  double acc = 0.0;
  const int n_seeds = 2000, len = 16;
  for (int s = 0; s < n_seeds; ++s) {
    const auto alpha = jakes_fading(fd, ts, len, static_cast<std::uint64_t>(s));
    for (const auto& a : alpha) acc += std::norm(a);
  }
  EXPECT_NEAR(acc / (n_seeds * len), 1.0, 0.05);
}

// ensemble autocorrelation vs the Bessel oracle J0(2 pi fD Ts dn)
TEST(JakesFading, AutocorrelationMatchesBessel) {
  const double fd = 50.0, ts = 1e-4;  // fd*ts = 5e-3
  const int lag = static_cast<int>(std::ceil(0.2 / (fd * ts)));  // J0 argument 0.4*pi
  const int len = lag + 64;
  std::complex<double> acc(0.0, 0.0);
  const int n_seeds = 2000;
  for (int s = 0; s < n_seeds; ++s) {
    const auto a = jakes_fading(fd, ts, static_cast<std::size_t>(len),
                                mix_seed(777, static_cast<std::uint64_t>(s)));
    std::complex<double> r(0.0, 0.0);
    for (int n = 0; n + lag < len; ++n) r += a[n + lag] * std::conj(a[n]);
    acc += r / static_cast<double>(len - lag);
  }
  const double measured = acc.real() / n_seeds;
  const double oracle = std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi * fd * ts * lag);
  EXPECT_NEAR(measured, oracle, 0.05);
}

TEST(ApplyTdl, IdentityChannel) {
  ComplexSignal x;
  Rng rng(3);
  x.samples.resize(32);
  for (auto& v : x.samples) v = {rng.gauss(), rng.gauss()};
  ChannelRealization r;
  r.tap_indices = {0};
  r.tap_gains = {std::vector<std::complex<double>>(32, {1.0, 0.0})};
  const auto y = apply_tdl(x, r);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.samples[i], x.samples[i]);
}

TEST(ApplyTdl, PureDelay) {
  ComplexSignal x;
  Rng rng(4);
  x.samples.resize(16);
  for (auto& v : x.samples) v = {rng.gauss(), rng.gauss()};
  ChannelRealization r;
  r.tap_indices = {3};
  r.tap_gains = {std::vector<std::complex<double>>(16, {1.0, 0.0})};
  const auto y = apply_tdl(x, r);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.samples[i], std::complex<double>(0.0, 0.0));
  for (std::size_t i = 3; i < 16; ++i) EXPECT_EQ(y.samples[i], x.samples[i - 3]);
}

// static two-tap channel vs direct convolution oracle
TEST(ApplyTdl, MatchesDirectConvolution) {
  ComplexSignal x;
  Rng rng(9);
  x.samples.resize(64);
  for (auto& v : x.samples) v = {rng.gauss(), rng.gauss()};
  const std::complex<double> h0(0.8, 0.0), h2(0.0, 0.6);
  ChannelRealization r;
  r.tap_indices = {0, 2};
  r.tap_gains = {std::vector<std::complex<double>>(64, h0),
                 std::vector<std::complex<double>>(64, h2)};
  const auto y = apply_tdl(x, r);
  for (std::size_t n = 0; n < 64; ++n) {
    std::complex<double> ref = h0 * x.samples[n];
    if (n >= 2) ref += h2 * x.samples[n - 2];
    EXPECT_NEAR(std::abs(y.samples[n] - ref), 0.0, 1e-12);
  }
}

TEST(ApplyTdl, LinearInInput) {
  Rng rng(10);
  ComplexSignal a, b, sum;
  a.samples.resize(32);
  b.samples.resize(32);
  sum.samples.resize(32);
  for (std::size_t i = 0; i < 32; ++i) {
    a.samples[i] = {rng.gauss(), rng.gauss()};
    b.samples[i] = {rng.gauss(), rng.gauss()};
    sum.samples[i] = a.samples[i] + b.samples[i];
  }
  const auto profile = gen_scenario(5, 3, 3e-6, 10.0);
  const auto r = make_realization(profile, make_mobility(Mobility::kVehicular), 1e6, 32, 8, 20.0);
  const auto ya = apply_tdl(a, r);
  const auto yb = apply_tdl(b, r);
  const auto ys = apply_tdl(sum, r);
  for (std::size_t i = 0; i < 32; ++i)
    EXPECT_NEAR(std::abs(ys.samples[i] - ya.samples[i] - yb.samples[i]), 0.0, 1e-12);
}

TEST(ApplyTdl, GainLengthMismatchThrows) {
  ComplexSignal x;
  x.samples.resize(8);
  ChannelRealization r;
  r.tap_indices = {0};
  r.tap_gains = {std::vector<std::complex<double>>(4, {1.0, 0.0})};
  EXPECT_THROW(apply_tdl(x, r), ShapeError);
}

TEST(AddAwgn, NoiseVarianceFromSnr) {
  ComplexSignal y;
  y.samples.assign(1000, {1.0, 0.0});  // unit power
  EXPECT_NEAR(noise_variance_for(y, 20.0), 0.01, 1e-12);
}

TEST(AddAwgn, EmpiricalSnrWithinTolerance) {
  ComplexSignal y;
  Rng rng(12);
  y.samples.resize(100000);
  for (auto& v : y.samples) v = {rng.gauss(), rng.gauss()};
  const double snr_db = 10.0;
  const auto z = add_awgn(y, snr_db, 77);
  double sig = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sig += std::norm(y.samples[i]);
    noise += std::norm(z.samples[i] - y.samples[i]);
  }
  const double measured_db = 10.0 * std::log10(sig / noise);
  EXPECT_NEAR(measured_db, snr_db, 0.2);
}

TEST(AddAwgn, InfiniteSnrIsIdentity) {
  ComplexSignal y;
  y.samples.assign(16, {0.5, -0.25});
  const auto z = add_awgn(y, std::numeric_limits<double>::infinity(), 1);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(z.samples[i], y.samples[i]);
}

TEST(AddAwgn, ZeroSignalThrows) {
  ComplexSignal y;
  y.samples.assign(8, {0.0, 0.0});
  EXPECT_THROW(add_awgn(y, 10.0, 1), ZeroSignal);
  ComplexSignal empty;
  EXPECT_THROW(add_awgn(empty, 10.0, 1), ZeroSignal);
}

// the seeded noise is exactly reproducible, so the noisy sample equals
// y + noise term for term
TEST(AddAwgn, SeededNoiseRecoversSignal) {
  ComplexSignal y;
  Rng rng(13);
  y.samples.resize(256);
  for (auto& v : y.samples) v = {rng.gauss(), rng.gauss()};
  const double snr_db = 5.0;
  const std::uint64_t seed = 999;
  const auto z = add_awgn(y, snr_db, seed);
  const auto w = awgn_noise(y.size(), std::sqrt(noise_variance_for(y, snr_db)), seed);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::complex<double> expected = y.samples[i] + w[i];
    EXPECT_EQ(z.samples[i], expected);
  }
}

// with all f_D = 0 the channel is a fixed FIR filter
TEST(Realization, StaticChannelIsFir) {
  const auto profile = gen_scenario(21, 4, 3e-6, 8.0);
  const auto r = make_realization(profile, make_mobility(Mobility::kStatic), 1e6, 48, 5, 20.0);
  ComplexSignal x;
  Rng rng(6);
  x.samples.resize(48);
  for (auto& v : x.samples) v = {rng.gauss(), rng.gauss()};
  const auto y = apply_tdl(x, r);
  // direct truncated convolution with the (time-invariant) tap gains
  for (std::size_t n = 0; n < x.size(); ++n) {
    std::complex<double> ref(0.0, 0.0);
    for (std::size_t l = 0; l < r.tap_indices.size(); ++l) {
      const std::size_t d = r.tap_indices[l];
      if (n >= d) ref += r.tap_gains[l][n] * x.samples[n - d];
    }
    EXPECT_NEAR(std::abs(y.samples[n] - ref), 0.0, 1e-12);
  }
  // and the gains really are constant over time
  for (const auto& taps : r.tap_gains)
    for (const auto& h : taps) EXPECT_EQ(h, taps[0]);
}

TEST(PathProfileJson, Roundtrip) {
  const auto p = gen_scenario(3, 5, 4e-6, 10.0, "city0");
  const auto j = to_json(p);
  const auto q = path_profile_from_json(j);
  EXPECT_EQ(p.delays_s, q.delays_s);
  EXPECT_EQ(p.powers, q.powers);
  EXPECT_EQ(p.scenario_id, q.scenario_id);
}

TEST(PathProfileJson, RejectsBadProfile) {
  nlohmann::json j;
  j["scenario_id"] = "bad";
  j["delays_s"] = {0.0, 1e-6};
  j["powers"] = {0.5, 0.2};  // does not sum to 1
  EXPECT_THROW(path_profile_from_json(j), ConfigError);
}
