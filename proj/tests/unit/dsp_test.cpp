#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/dsp/rng.hpp"
#include "anclab/dsp/signal.hpp"
#include "anclab/error.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using dsp::FirFilter;
using dsp::Signal;

TEST(Signal, RejectsNonFiniteAndBadRate) {
  EXPECT_THROW(Signal({1.0, std::nan("")}, 1.0), Error);
  EXPECT_THROW(Signal({1.0}, 0.0), ConfigError);
  EXPECT_THROW(Signal({1.0}, -1.0), ConfigError);
}

TEST(FirFilter, EmptyFilterIsAnError) {
  EXPECT_EQ(oracle::error_of([] { FirFilter f(std::vector<double>{}); }), "empty filter");
  std::vector<double> out(4);
  EXPECT_EQ(oracle::error_of([&] { dsp::convolve_same(std::vector<double>(4, 1.0), {}, out); }),
            "empty filter");
}

TEST(Convolve, ImpulseResponseReadout) {
  const Signal y = dsp::convolve(Signal({1, 0, 0, 0}, 1.0), FirFilter({1, 0.5}));
  EXPECT_EQ(y.vector(), (std::vector<double>{1, 0.5, 0, 0}));
}

TEST(Convolve, PureDelayShiftsInput) {
  const auto xv = oracle::random_vector(50, 1);
  const Signal y = dsp::convolve(Signal(xv, 10.0), FirFilter::impulse(8, 7));
  EXPECT_EQ(y.sample_rate_hz(), 10.0);
  for (std::size_t n = 0; n < 50; ++n) EXPECT_EQ(y[n], n < 7 ? 0.0 : xv[n - 7]);
}

TEST(Convolve, MatchesFftOracleOn200Pairs) {
  double worst = 0.0;
  for (unsigned t = 0; t < 200; ++t) {
    const std::size_t nx = 16 + (t * 37) % 500, nh = 1 + (t * 13) % 100;
    const auto x = oracle::random_vector(nx, 2 * t), h = oracle::random_vector(nh, 2 * t + 1);
    const Signal y = dsp::convolve(Signal(x, 1.0), FirFilter(h));
    worst = std::max(worst, oracle::max_rel_diff(y.vector(), oracle::fft_convolve(x, h)));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Convolve, Len256By64AgainstFftOracle) {
  const auto x = oracle::random_vector(256, 10), h = oracle::random_vector(64, 11);
  const Signal y = dsp::convolve(Signal(x, 1.0), FirFilter(h));
  EXPECT_LT(oracle::max_rel_diff(y.vector(), oracle::fft_convolve(x, h)), 1e-10);
}

TEST(Convolve, Linearity) {
  const auto x1 = oracle::random_vector(300, 20), x2 = oracle::random_vector(300, 21);
  const FirFilter h(oracle::random_vector(40, 22));
  const double a = 0.7, b = -1.9;
  std::vector<double> mix(300);
  for (std::size_t i = 0; i < 300; ++i) mix[i] = a * x1[i] + b * x2[i];
  const auto lhs = dsp::convolve(Signal(mix, 1.0), h).vector();
  const auto y1 = dsp::convolve(Signal(x1, 1.0), h).vector(), y2 = dsp::convolve(Signal(x2, 1.0), h).vector();
  std::vector<double> rhs(300);
  for (std::size_t i = 0; i < 300; ++i) rhs[i] = a * y1[i] + b * y2[i];
  EXPECT_LT(oracle::max_rel_diff(lhs, rhs), 1e-12);
}

TEST(Convolve, TimeInvariance) {
  const auto x = oracle::random_vector(200, 30);
  const FirFilter h(oracle::random_vector(25, 31));
  const std::size_t delay = 13;
  std::vector<double> xd(200, 0.0);
  for (std::size_t i = delay; i < 200; ++i) xd[i] = x[i - delay];
  const auto y = dsp::convolve(Signal(x, 1.0), h).vector();
  const auto yd = dsp::convolve(Signal(xd, 1.0), h).vector();
  for (std::size_t n = delay; n < 200; ++n) EXPECT_NEAR(yd[n], y[n - delay], 1e-12);
}

TEST(Bandpass, CenterGainAndStopbands) {
  const FirFilter h = dsp::design_bandpass_fir(20, 1900, 513, 13000);
  EXPECT_NEAR(oracle::response_db(h.vector(), 960, 13000), 0.0, 0.5);
  EXPECT_LT(oracle::response_db(h.vector(), 3800, 13000), -40.0);
}

TEST(Bandpass, ClampedUpperStopbandFor10To3000) {
  const FirFilter h = dsp::design_bandpass_fir(10, 3000, 513, 13000);
  EXPECT_NEAR(oracle::response_db(h.vector(), 1505, 13000), 0.0, 0.5);
  EXPECT_LT(oracle::response_db(h.vector(), 0.98 * 6500, 13000), -40.0);
}

TEST(Bandpass, LowerStopbandWhereResolvable) {
  // 513 taps resolve roughly fs / 513 = 25 Hz, so the half-low-edge stopband
  // is checked on a band whose lower edge is well above that.
  const FirFilter h = dsp::design_bandpass_fir(1430, 1900, 513, 13000);
  EXPECT_LT(oracle::response_db(h.vector(), 715, 13000), -40.0);
  EXPECT_LT(oracle::response_db(h.vector(), 3800, 13000), -40.0);
}

TEST(Bandpass, SymmetricTaps) {
  for (auto [lo, hi] : {std::pair{20.0, 1900.0}, {10.0, 3000.0}, {300.0, 350.0}}) {
    const FirFilter h = dsp::design_bandpass_fir(lo, hi, 255, 13000);
    for (std::size_t k = 0; k < h.size(); ++k) EXPECT_EQ(h[k], h[h.size() - 1 - k]);
  }
}

TEST(Bandpass, InvalidBands) {
  EXPECT_EQ(oracle::error_of([] { dsp::design_bandpass_fir(500, 400, 513, 13000); }), "invalid band");
  EXPECT_EQ(oracle::error_of([] { dsp::design_bandpass_fir(0, 400, 513, 13000); }), "invalid band");
  EXPECT_EQ(oracle::error_of([] { dsp::design_bandpass_fir(100, 6500, 513, 13000); }), "invalid band");
  EXPECT_THROW(dsp::design_bandpass_fir(100, 400, 512, 13000), ConfigError);
}

TEST(WhiteNoise, DeterministicAndStandardNormal) {
  const Signal a = dsp::generate_white_noise(100000, {5, 1});
  const Signal b = dsp::generate_white_noise(100000, {5, 1});
  EXPECT_EQ(a.vector(), b.vector());
  const double mean = std::accumulate(a.vector().begin(), a.vector().end(), 0.0) / 1e5;
  double var = 0.0;
  for (double v : a.vector()) var += (v - mean) * (v - mean);
  var /= 1e5;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
  EXPECT_THROW(dsp::generate_white_noise(0, {5, 1}), ConfigError);
}

TEST(WhiteNoise, StreamsAreUncorrelated) {
  const auto a = dsp::generate_white_noise(100000, {5, 1}).vector();
  const auto b = dsp::generate_white_noise(100000, {5, 2}).vector();
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  EXPECT_LT(std::abs(ab / std::sqrt(aa * bb)), 0.02);
}

TEST(Rng, PinnedSequence) {
  // Any change to the generator breaks reproducibility of every stored
  // dataset manifest and checkpoint.
  dsp::Rng a({0, 0});
  EXPECT_EQ(a.next_u64(), 6235967106033911276ull);
  EXPECT_EQ(a.next_u64(), 4964577235801436555ull);
  EXPECT_EQ(a.next_u64(), 5009519748041543987ull);
  dsp::Rng b({42, 1});
  EXPECT_EQ(b.uniform(), 0.20182135270036283);
  EXPECT_EQ(b.normal(), 1.0441137113479704);
}

TEST(Rng, UniformRangeAndDerive) {
  dsp::Rng c({1, 2});
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  EXPECT_NE(dsp::derive({1, 2}, 3), dsp::derive({1, 2}, 4));
  EXPECT_EQ(dsp::derive({1, 2}, 3), dsp::derive({1, 2}, 3));
}

TEST(BandNoise, PowerInsideBandAndUnitRms) {
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 1.0, 13000, {7, 7});
  EXPECT_EQ(x.size(), 13000u);
  EXPECT_NEAR(dsp::rms(x.samples()), 1.0, 1e-9);
  EXPECT_GE(oracle::band_power_fraction(x.samples(), 13000, 20, 490), 0.95);
  const Signal hi = dsp::generate_bandlimited_noise(1430, 1900, 1.0, 13000, {7, 8});
  EXPECT_LT(oracle::band_power_fraction(hi.samples(), 13000, 0, 1000), 0.01);
  EXPECT_EQ(hi.vector(), dsp::generate_bandlimited_noise(1430, 1900, 1.0, 13000, {7, 8}).vector());
}

TEST(BandNoise, PropagatesBandErrors) {
  EXPECT_EQ(oracle::error_of([] { dsp::generate_bandlimited_noise(600, 500, 1.0, 13000, {1, 1}); }),
            "invalid band");
}

TEST(MixAtSnr, AddedPowerMatchesTarget) {
  const Signal clean = dsp::generate_bandlimited_noise(100, 900, 1.0, 13000, {3, 3});
  const Signal mixed = dsp::mix_at_snr(clean, {3, 4}, 10.0);
  std::vector<double> added(clean.size());
  for (std::size_t i = 0; i < added.size(); ++i) added[i] = mixed[i] - clean[i];
  EXPECT_NEAR(dsp::rms(added), std::pow(10.0, -0.5), 1e-6);
  const double snr = 10.0 * std::log10(dsp::mean_power(clean.samples()) / dsp::mean_power(added));
  EXPECT_NEAR(snr, 10.0, 1e-6);
}

TEST(MixAtSnr, InfinityPassesThroughAndSilenceFails) {
  const Signal clean = dsp::generate_white_noise(100, {1, 1});
  EXPECT_EQ(dsp::mix_at_snr(clean, {2, 2}, dsp::kNoNoise).vector(), clean.vector());
  EXPECT_EQ(oracle::error_of([] { dsp::mix_at_snr(Signal::zeros(10, 1.0), {1, 1}, 10.0); }),
            "silent signal");
}

TEST(PowerDbRatio, BasicsAndClamp) {
  const Signal a = dsp::generate_white_noise(1000, {1, 1});
  std::vector<double> ten(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ten[i] = 10.0 * a[i];
  const dsp::SampleRange all{0, a.size()};
  EXPECT_NEAR(dsp::power_db_ratio(a, a, all), 0.0, 1e-12);
  EXPECT_NEAR(dsp::power_db_ratio(Signal(ten, 1.0), a, all), 20.0, 1e-9);
  EXPECT_EQ(dsp::power_db_ratio(a, Signal::zeros(a.size(), 1.0), all), 120.0);
  EXPECT_EQ(dsp::power_db_ratio(Signal::zeros(a.size(), 1.0), a, all), -120.0);
  EXPECT_EQ(oracle::error_of([&] { dsp::power_db_ratio(a, a, {5, 5}); }), "empty interval");
}
