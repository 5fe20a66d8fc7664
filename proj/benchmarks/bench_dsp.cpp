#include <benchmark/benchmark.h>

#include "anclab/acoustics/plant.hpp"
#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/fxnlms/wiener.hpp"

using namespace anclab;

namespace {

const acoustics::AcousticScene& scene() {
  static const auto s = acoustics::synthesize_scene({}, {2024, 0x5C});
  return s;
}

const dsp::Signal& one_second() {
  static const auto x = dsp::generate_bandlimited_noise(20, 1900, 1.0, 13000, {1, 1});
  return x;
}

}  // namespace

static void BM_Convolve(benchmark::State& state) {
  const auto h = dsp::FirFilter::impulse(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(dsp::convolve(one_second(), h));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(one_second().size()));
}
BENCHMARK(BM_Convolve)->Arg(127)->Arg(512);

static void BM_DesignBandpass(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dsp::design_bandpass_fir(20, 490, 255, 13000));
}
BENCHMARK(BM_DesignBandpass);

static void BM_BandlimitedNoise(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dsp::generate_bandlimited_noise(20, 490, 1.0, 13000, {1, 2}));
}
BENCHMARK(BM_BandlimitedNoise);

// Sample-rate FxNLMS over one second; items are audio samples.
static void BM_FxnlmsSecond(benchmark::State& state) {
  fxnlms::FxnlmsOptions o;
  o.filter_len = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fxnlms::fxnlms_run(one_second(), scene(), o));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(one_second().size()));
}
BENCHMARK(BM_FxnlmsSecond)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_WienerOracle(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(fxnlms::wiener_oracle(one_second(), scene(), 512));
}
BENCHMARK(BM_WienerOracle)->Unit(benchmark::kMillisecond);
