#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "anclab/acoustics/plant.hpp"
#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/fxnlms/wiener.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using acoustics::AcousticScene;
using dsp::FirFilter;
using dsp::Signal;

namespace {

AcousticScene default_scene() { return acoustics::synthesize_scene({}, {1, 0x5C}); }

double residual_energy(const Signal& x, const AcousticScene& s, const FirFilter& w) {
  const Signal e = acoustics::residual(acoustics::disturbance(x, s),
                                       acoustics::apply_control(acoustics::filtered_reference(x, s), w));
  return dsp::energy(e.samples());
}

}  // namespace

TEST(Fxnlms, ZeroStepLeavesDisturbance) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 0.5, 13000, {1, 1});
  fxnlms::FxnlmsOptions o;
  o.mu = 0.0;
  const auto r = fxnlms::fxnlms_run(x, s, o);
  EXPECT_EQ(r.e.vector(), acoustics::disturbance(x, s).vector());
  for (double v : r.w_final.vector()) EXPECT_EQ(v, 0.0);
}

TEST(Fxnlms, SilentInput) {
  const auto r = fxnlms::fxnlms_run(Signal::zeros(2000, 13000), default_scene(), {});
  for (double v : r.w_final.vector()) EXPECT_EQ(v, 0.0);
  for (double v : r.e.vector()) EXPECT_EQ(v, 0.0);
}

TEST(Fxnlms, DivergenceIsReported) {
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 1.0, 13000, {1, 2});
  fxnlms::FxnlmsOptions o;
  o.normalized = false;
  o.mu = 1e3;
  EXPECT_EQ(oracle::error_of([&] { fxnlms::fxnlms_run(x, default_scene(), o); }).rfind("diverged at sample ", 0),
            0u);
}

TEST(Fxnlms, ScaleEquivariance) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 0.5, 13000, {1, 3});
  std::vector<double> scaled(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = 3.0 * x[i];
  fxnlms::FxnlmsOptions o;
  o.mu = 0.01;
  o.eps = 1e-20;
  const auto a = fxnlms::fxnlms_run(x, s, o);
  const auto b = fxnlms::fxnlms_run(Signal(scaled, 13000), s, o);
  EXPECT_LT(oracle::max_abs_diff(a.w_final.vector(), b.w_final.vector()), 1e-9);
}

TEST(Fxnlms, ResidualRatioTrendsDown) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 5.0, 13000, {42, 0});
  const auto r = fxnlms::fxnlms_run(x, s, {});
  const std::size_t win = 1300;
  double prev = 0.0;
  for (std::size_t start = 13000; start + win <= r.e.size(); start += win) {
    const double nmse = -dsp::power_db_ratio(r.d, r.e, {start, start + win});
    if (start > 13000) {
      EXPECT_LE(nmse, prev + 1.0) << "window at " << start;
    }
    prev = nmse;
  }
}

TEST(Fxnlms, TraceCsv) {
  fxnlms::FxnlmsOptions o;
  o.filter_len = 4;
  o.trace_stride = 100;
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 0.1, 13000, {1, 4});
  const auto r = fxnlms::fxnlms_run(x, default_scene(), o);
  ASSERT_FALSE(r.w_trace.empty());
  std::ostringstream out;
  fxnlms::write_trace_csv(out, r.w_trace);
  EXPECT_EQ(out.str().rfind("sample_index,tap_index,value\n", 0), 0u);
}

TEST(Wiener, IdentityScene) {
  const AcousticScene s(FirFilter::impulse(16, 5), FirFilter::impulse(1), FirFilter::impulse(1), 13000);
  const Signal x = dsp::generate_white_noise(4000, {2, 2}, 13000);
  const FirFilter w = fxnlms::wiener_oracle(x, s, 32);
  EXPECT_NEAR(w[5], 1.0, 1e-6);
  for (std::size_t k = 0; k < 32; ++k) {
    if (k != 5) {
      EXPECT_LT(std::abs(w[k]), 1e-6);
    }
  }
}

TEST(Wiener, IndependentDisturbanceGivesLittleReduction) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 1900, 2.0, 13000, {3, 1});
  const Signal fresh = dsp::generate_bandlimited_noise(20, 1900, 2.0, 13000, {3, 2});
  const Signal d = acoustics::disturbance(x, s);
  const Signal xf = acoustics::filtered_reference(fresh, s);
  const FirFilter w = fxnlms::wiener_solve(xf, d, 64);
  const Signal e = acoustics::residual(d, acoustics::apply_control(xf, w));
  EXPECT_LT(dsp::power_db_ratio(d, e, {13000, 26000}), 3.0);
}

TEST(Wiener, BeatsFxnlmsAndPerturbations) {
  const auto s = default_scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 2.0, 13000, {4, 1});
  const FirFilter w = fxnlms::wiener_oracle(x, s, 512);
  const auto r = fxnlms::fxnlms_run(x, s, {});
  const double best = residual_energy(x, s, w);
  EXPECT_LE(best, residual_energy(x, s, r.w_final));
  for (unsigned t = 0; t < 20; ++t) {
    auto taps = w.vector();
    const auto delta = oracle::random_vector(512, 300 + t, 1e-3);
    for (std::size_t k = 0; k < 512; ++k) taps[k] += delta[k];
    EXPECT_GE(residual_energy(x, s, FirFilter(taps)), best);
  }
}

TEST(Wiener, ShortSignalRejected) {
  EXPECT_THROW(fxnlms::wiener_oracle(Signal::zeros(100, 13000), default_scene(), 512), ConfigError);
}
