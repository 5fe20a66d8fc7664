#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "anclab/acoustics/plant.hpp"
#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"
#include "anclab/eval/harness.hpp"
#include "anclab/eval/report.hpp"
#include "anclab/eval/wav.hpp"
#include "anclab/fxnlms/wiener.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using dsp::Signal;
using eval::ControllerHandle;

namespace {

acoustics::AcousticScene scene() { return acoustics::synthesize_scene({}, {2024, 0x5C}); }

// Emits the same filter for every frame.
class ConstantGenerator final : public models::FilterGenerator<float> {
 public:
  explicit ConstantGenerator(std::vector<float> w) : w_(std::move(w)) {}
  models::ModelKind kind() const override { return models::ModelKind::kE2ECfg; }
  std::size_t filter_length() const override { return w_.size(); }
  void check_frame_length(std::size_t) const override {}
  nn::Tensor<float> generate(nn::Context<float>&, const nn::Tensor<float>& frames) override {
    nn::Tensor<float> out({frames.dim(0), w_.size()});
    for (std::size_t b = 0; b < frames.dim(0); ++b) std::copy(w_.begin(), w_.end(), out.data() + b * w_.size());
    return out;
  }
  nn::ParamList<float> parameters() const override { return {}; }

 private:
  std::vector<float> w_;
};

void write_header(std::string& out, std::uint16_t channels, std::uint32_t rate, std::uint32_t frames) {
  auto p16 = [&](std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); };
  auto p32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  const std::uint32_t data = frames * channels * 2;
  out += "RIFF";
  p32(36 + data);
  out += "WAVEfmt ";
  p32(16);
  p16(1);
  p16(channels);
  p32(rate);
  p32(rate * channels * 2);
  p16(static_cast<std::uint16_t>(channels * 2));
  p16(16);
  out += "data";
  p32(data);
  out.append(data, '\0');
}

}  // namespace

TEST(Harness, FixedFilterMatchesOraclePlant) {
  const auto s = scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 960, 1.0, 13000, {1, 1});
  const auto w = oracle::random_vector(64, 3, 0.1);
  const auto r = eval::run_sim(ControllerHandle::fixed(dsp::FirFilter(w)), x, s, 1.0);
  const auto d = oracle::fft_convolve(x.samples(), s.primary().taps());
  const auto y = oracle::fft_convolve(oracle::fft_convolve(x.samples(), s.secondary().taps()), w);
  EXPECT_LT(oracle::max_abs_diff(r.d.samples(), d), 1e-10);
  EXPECT_LT(oracle::max_abs_diff(r.y.samples(), y), 1e-10);
  for (std::size_t n = 0; n < r.e.size(); ++n) ASSERT_EQ(r.e[n], r.d[n] - r.y[n]);
}

TEST(Harness, ZeroControllerGivesZeroReduction) {
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 2.0, 13000, {1, 2});
  const auto r = eval::run_sim(ControllerHandle::zero(512), x, scene(), 2.0);
  EXPECT_EQ(eval::nr_db(r, 1.0), 0.0);
  for (const auto& [t, v] : eval::nmse_curve(r, 0.1)) EXPECT_EQ(v, 0.0) << t;
  EXPECT_EQ(r.per_second_nr.size(), 2u);
}

TEST(Harness, NrMatchesDirectPowerRatio) {
  const auto s = scene();
  const Signal train = dsp::generate_bandlimited_noise(20, 490, 3.0, 13000, {1, 3});
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 2.0, 13000, {1, 4});
  const auto r = eval::run_sim(ControllerHandle::fixed(fxnlms::wiener_oracle(train, s, 512)), x, s, 2.0);
  long double pd = 0, pe = 0;
  for (std::size_t n = 13000; n < 26000; ++n) {
    pd += static_cast<long double>(r.d[n]) * r.d[n];
    pe += static_cast<long double>(r.e[n]) * r.e[n];
  }
  const double expected = static_cast<double>(10.0L * std::log10(pd / pe));
  EXPECT_NEAR(eval::nr_db(r, 1.0), expected, 1e-9);
  EXPECT_GT(expected, 20.0);
  EXPECT_EQ(oracle::error_of([&] { eval::nr_db(r, 3.0); }), "NR window outside the run");
}

TEST(Harness, GeneratorLatencyDelaysFilterByOneFrame) {
  const auto s = scene();
  const Signal x = dsp::generate_bandlimited_noise(20, 490, 3.0, 13000, {1, 5});
  const Signal train = dsp::generate_bandlimited_noise(20, 490, 3.0, 13000, {1, 6});
  const dsp::FirFilter w = fxnlms::wiener_oracle(train, s, 128);
  std::vector<float> wf(w.vector().begin(), w.vector().end());
  auto gen = std::make_shared<ConstantGenerator>(wf);
  const auto late = eval::run_sim(ControllerHandle::network(gen, 13000, 1), x, s, 3.0);
  const auto now = eval::run_sim(ControllerHandle::network(gen, 13000, 0), x, s, 3.0);
  EXPECT_EQ(late.filters_emitted.size(), 3u);
  for (std::size_t n = 0; n < 13000; ++n) ASSERT_EQ(late.y[n], 0.0);
  EXPECT_NEAR(late.per_second_nr[0], 0.0, 1e-12);
  EXPECT_GT(now.per_second_nr[0], 10.0);
  EXPECT_NEAR(late.per_second_nr[2], now.per_second_nr[2], 1e-9);
  EXPECT_EQ(oracle::error_of([&] { ControllerHandle::network(gen, 13000, 2); }),
            "filter latency must be 0 or 1 frames");
}

TEST(Harness, RejectsRateMismatch) {
  const Signal x = Signal::zeros(1000, 16000);
  EXPECT_EQ(oracle::error_of([&] { eval::run_sim(ControllerHandle::zero(8), x, scene(), 0.05); }),
            "sample rate mismatch");
}

TEST(Scenario, SegmentsHaveUnitRmsAndConcatenate) {
  const Signal a = dsp::generate_bandlimited_noise(20, 490, 1.0, 13000, {2, 1});
  std::vector<double> loud(a.vector());
  for (double& v : loud) v *= 7.0;
  const Signal b(loud, 13000);
  const Signal sc = eval::build_switch_scenario({a, b, a}, 0.5);
  ASSERT_EQ(sc.size(), 3u * 6500u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(dsp::rms(sc.samples().subspan(k * 6500, 6500)), 1.0, 1e-12);
  }
  EXPECT_EQ(oracle::error_of([&] { eval::build_switch_scenario({a}, 0.5); }),
            "scenario needs at least two segments");
  EXPECT_EQ(oracle::error_of([&] { eval::build_switch_scenario({a, Signal::zeros(13000, 13000)}, 0.5); }),
            "silent signal in scenario");
  EXPECT_EQ(oracle::error_of([&] { eval::build_switch_scenario({a, a}, 2.0); }),
            "scenario source shorter than the segment");
}

TEST(Wav, FloatRoundTripIsExactForFloatValues) {
  oracle::TempDir dir;
  std::vector<double> v = oracle::random_vector(1000, 7, 0.3);
  for (double& s : v) s = static_cast<float>(s);
  eval::write_wav(Signal(v, 13000), dir.path() / "a.wav");
  EXPECT_EQ(eval::read_wav(dir.path() / "a.wav").vector(), v);
}

TEST(Wav, Pcm16QuantizesAndClips) {
  oracle::TempDir dir;
  eval::write_wav(Signal({1.0, -1.0, 0.5, 2.0, 1.0 / 32768}, 13000), dir.path() / "p.wav", eval::WavFormat::kPcm16);
  const Signal back = eval::read_wav(dir.path() / "p.wav");
  ASSERT_EQ(back.size(), 5u);
  EXPECT_DOUBLE_EQ(back[0], 32767.0 / 32768.0);
  EXPECT_NEAR(back[0], 0.99997, 1e-5);
  EXPECT_DOUBLE_EQ(back[1], -1.0);
  EXPECT_DOUBLE_EQ(back[2], 0.5);
  EXPECT_DOUBLE_EQ(back[3], 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(back[4], 1.0 / 32768);
}

TEST(Wav, RejectsOtherRatesAndChannels) {
  oracle::TempDir dir;
  std::string cd, stereo;
  write_header(cd, 1, 44100, 10);
  write_header(stereo, 2, 13000, 10);
  std::ofstream(dir.path() / "cd.wav", std::ios::binary) << cd;
  std::ofstream(dir.path() / "st.wav", std::ios::binary) << stereo;
  const std::string rate = oracle::error_of([&] { eval::read_wav(dir.path() / "cd.wav"); });
  EXPECT_NE(rate.find("resample externally"), std::string::npos) << rate;
  EXPECT_NE(rate.find("44100"), std::string::npos) << rate;
  const std::string ch = oracle::error_of([&] { eval::read_wav(dir.path() / "st.wav"); });
  EXPECT_NE(ch.find("2 channels"), std::string::npos) << ch;
  EXPECT_EQ(oracle::error_of([&] { eval::write_wav(Signal::zeros(4, 44100), dir.path() / "x.wav"); }),
            "WAV output is 13000 Hz only; resample externally");
}

TEST(Compare, SingleCellAndCsvRoundTrip) {
  const auto s = scene();
  const auto noises = eval::synthetic_band_cases({{20, 490}}, 2.0, 13000, {3, 1});
  ASSERT_EQ(noises.size(), 1u);
  EXPECT_EQ(noises[0].name, "20-490Hz");
  const auto table = eval::compare_table({ControllerHandle::zero(512)}, noises, s, 2.0);
  ASSERT_EQ(table.cells.size(), 1u);
  EXPECT_TRUE(table.at(0, 0).ok);
  EXPECT_EQ(table.at(0, 0).nr_db, 0.0);

  std::stringstream csv;
  eval::write_compare_csv(csv, table);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "noise,controller,nr_db,duration_s,window_s");
  const auto back = eval::read_compare_csv(csv);
  ASSERT_EQ(back.cells.size(), 1u);
  EXPECT_EQ(back.cells[0].noise, "20-490Hz");
  EXPECT_EQ(back.cells[0].controller, "zero");
  EXPECT_EQ(back.cells[0].nr_db, 0.0);
  EXPECT_EQ(back.duration_s, 2.0);
}

TEST(Compare, TableLayoutAverageRowsAndFailedCells) {
  const auto s = scene();
  const auto noises = eval::synthetic_band_cases({{20, 490}, {490, 960}}, 2.0, 13000, {3, 2});
  fxnlms::FxnlmsOptions fx;
  fxnlms::FxnlmsOptions unstable;
  unstable.normalized = false;
  unstable.mu = 1e3;
  const auto bad = ControllerHandle::adaptive(unstable, "broken");
  const auto table = eval::compare_table({ControllerHandle::zero(512), ControllerHandle::adaptive(fx), bad},
                                         noises, s, 2.0);
  ASSERT_EQ(table.cells.size(), 6u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(table.at(i, 0).noise, noises[i].name);
    EXPECT_EQ(table.at(i, 0).nr_db, 0.0);
    EXPECT_GT(table.at(i, 1).nr_db, 2.0);
    EXPECT_FALSE(table.at(i, 2).ok);
    EXPECT_EQ(table.at(i, 2).error.rfind("diverged", 0), 0u);
  }
  std::stringstream wide;
  eval::write_compare_wide_csv(wide, table);
  std::vector<std::string> lines;
  for (std::string line; std::getline(wide, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "category,noise,zero,fxnlms,broken,best");
  EXPECT_EQ(lines[3].rfind("synthetic,average,", 0), 0u);
  EXPECT_NE(lines[1].find("ERR"), std::string::npos);
  std::stringstream csv;
  eval::write_compare_csv(csv, table);
  EXPECT_NE(csv.str().find("broken,ERR"), std::string::npos);
}
