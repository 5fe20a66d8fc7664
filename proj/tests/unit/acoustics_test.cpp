#include <gtest/gtest.h>

#include <cmath>

#include "anclab/acoustics/plant.hpp"
#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"
#include "anclab/fxnlms/wiener.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using acoustics::AcousticScene;
using dsp::FirFilter;
using dsp::Signal;

namespace {

AcousticScene default_scene() { return acoustics::synthesize_scene({}, {1, 0x5C}); }

Signal impulse(std::size_t n) {
  std::vector<double> v(n, 0.0);
  v[0] = 1.0;
  return Signal(v, 13000);
}

}  // namespace

TEST(Scene, PerfectEstimateByDefault) {
  const auto s = default_scene();
  EXPECT_EQ(s.secondary_estimate().vector(), s.secondary().vector());
  EXPECT_EQ(s.sample_rate_hz(), 13000.0);
}

TEST(Scene, DelaysAreLeadingZeros) {
  const auto s = default_scene();
  EXPECT_EQ(s.primary().first_nonzero(), 40u);
  EXPECT_EQ(s.secondary().first_nonzero(), 10u);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_EQ(s.primary()[k], 0.0);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(s.secondary()[k], 0.0);
}

TEST(Scene, PrimaryPowerInsideBand) {
  const auto s = default_scene();
  std::vector<double> padded(8192, 0.0);
  std::copy(s.primary().vector().begin(), s.primary().vector().end(), padded.begin());
  EXPECT_GE(oracle::band_power_fraction(padded, 13000, 10, 3000), 0.99);
}

TEST(Scene, NonCausalRejected) {
  acoustics::SceneConfig c;
  c.secondary_delay = 40;
  EXPECT_EQ(oracle::error_of([&] { acoustics::synthesize_scene(c, {1, 1}); }), "non-causal scene");
  EXPECT_EQ(oracle::error_of([] {
              AcousticScene(FirFilter::impulse(8, 2), FirFilter::impulse(8, 3), FirFilter::impulse(8, 3), 13000);
            }),
            "non-causal scene");
}

TEST(Scene, DeterministicAndPerturbedEstimate) {
  acoustics::SceneConfig c;
  c.estimate_error = 0.05;
  const auto a = acoustics::synthesize_scene(c, {3, 3});
  const auto b = acoustics::synthesize_scene(c, {3, 3});
  EXPECT_EQ(a.secondary_estimate().vector(), b.secondary_estimate().vector());
  double de = 0.0, se = 0.0;
  for (std::size_t k = 0; k < a.secondary().size(); ++k) {
    const double d = a.secondary_estimate()[k] - a.secondary()[k];
    de += d * d;
    se += a.secondary()[k] * a.secondary()[k];
  }
  EXPECT_NEAR(de / se, 0.05, 1e-3);
}

TEST(Plant, ImpulseResponses) {
  const auto s = default_scene();
  const Signal d = acoustics::disturbance(impulse(400), s);
  const Signal xf = acoustics::filtered_reference(impulse(400), s);
  for (std::size_t n = 0; n < 400; ++n) {
    EXPECT_EQ(d[n], n < s.primary().size() ? s.primary()[n] : 0.0);
    EXPECT_EQ(xf[n], n < s.secondary_estimate().size() ? s.secondary_estimate()[n] : 0.0);
  }
  const Signal zero = acoustics::disturbance(Signal::zeros(100, 13000), s);
  for (double v : zero.vector()) EXPECT_EQ(v, 0.0);
}

TEST(Plant, MatchesFftOracle) {
  const auto s = default_scene();
  const auto x = oracle::random_vector(5000, 4);
  const Signal sx(x, 13000);
  EXPECT_LT(oracle::max_rel_diff(acoustics::disturbance(sx, s).vector(),
                                 oracle::fft_convolve(x, s.primary().vector())),
            1e-10);
  EXPECT_LT(oracle::max_rel_diff(acoustics::filtered_reference(sx, s).vector(),
                                 oracle::fft_convolve(x, s.secondary().vector())),
            1e-10);
  EXPECT_EQ(acoustics::filtered_reference(sx, s).vector(), dsp::convolve(sx, s.secondary()).vector());
}

TEST(Plant, RateMismatch) {
  EXPECT_THROW(acoustics::disturbance(Signal({1.0, 2.0}, 8000), default_scene()), ConfigError);
}

TEST(Plant, ApplyControl) {
  const auto xfv = oracle::random_vector(600, 5);
  const Signal xf(xfv, 13000);
  EXPECT_EQ(acoustics::apply_control(xf, FirFilter::impulse(512)).vector(), xfv);
  const Signal silent = acoustics::apply_control(xf, FirFilter::zeros(512));
  for (double v : silent.vector()) EXPECT_EQ(v, 0.0);
  const auto w = oracle::random_vector(512, 6);
  EXPECT_LT(oracle::max_rel_diff(acoustics::apply_control(xf, FirFilter(w), 512).vector(),
                                 oracle::naive_convolve(xfv, w)),
            1e-12);
  EXPECT_EQ(oracle::error_of([&] { acoustics::apply_control(xf, FirFilter(w), 256); }),
            "control length mismatch");
}

TEST(Plant, Residual) {
  const Signal d(oracle::random_vector(100, 7), 13000), y(oracle::random_vector(100, 8), 13000);
  const Signal cancelled = acoustics::residual(d, d);
  for (double v : cancelled.vector()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(acoustics::residual(d, Signal::zeros(100, 13000)).vector(), d.vector());
  const Signal e = acoustics::residual(d, y);
  for (std::size_t n = 0; n < 100; ++n) {
    EXPECT_EQ(e[n], d[n] - y[n]);
    EXPECT_NEAR(e[n] + y[n], d[n], 1e-14);
  }
  EXPECT_THROW(acoustics::residual(d, Signal::zeros(99, 13000)), Error);
}

TEST(Plant, LinearInReference) {
  const auto s = default_scene();
  const FirFilter w(oracle::random_vector(64, 9, 0.1));
  auto e_of = [&](const std::vector<double>& x) {
    const Signal sx(x, 13000);
    return acoustics::residual(acoustics::disturbance(sx, s),
                               acoustics::apply_control(acoustics::filtered_reference(sx, s), w))
        .vector();
  };
  const auto x1 = oracle::random_vector(2000, 10), x2 = oracle::random_vector(2000, 11);
  std::vector<double> mix(2000), expect(2000);
  const auto e1 = e_of(x1), e2 = e_of(x2);
  for (std::size_t i = 0; i < 2000; ++i) {
    mix[i] = 2.0 * x1[i] - 0.5 * x2[i];
    expect[i] = 2.0 * e1[i] - 0.5 * e2[i];
  }
  EXPECT_LT(oracle::max_rel_diff(e_of(mix), expect), 1e-12);
}

TEST(Plant, WienerBeatsRandomPerturbations) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(100, 1500, 2.0, 13000, {8, 8});
  const FirFilter w = fxnlms::wiener_oracle(x, s, 128);
  const Signal d = acoustics::disturbance(x, s), xf = acoustics::filtered_reference(x, s);
  auto power = [&](const FirFilter& f) {
    const Signal e = acoustics::residual(d, acoustics::apply_control(xf, f));
    return dsp::energy(e.samples());
  };
  const double best = power(w);
  double wn = 0.0;
  for (double v : w.vector()) wn += v * v;
  wn = std::sqrt(wn);
  for (unsigned t = 0; t < 100; ++t) {
    auto delta = oracle::random_vector(128, 100 + t);
    double dn = 0.0;
    for (double v : delta) dn += v * v;
    std::vector<double> taps = w.vector();
    for (std::size_t k = 0; k < 128; ++k) taps[k] += 0.01 * wn * delta[k] / std::sqrt(dn);
    EXPECT_LE(best, power(FirFilter(taps)));
  }
}
