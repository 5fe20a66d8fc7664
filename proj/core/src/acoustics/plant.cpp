#include "anclab/acoustics/plant.hpp"

#include <vector>

#include "anclab/error.hpp"

namespace anclab::acoustics {

namespace {
void check_rate(const dsp::Signal& x, const AcousticScene& scene) {
  if (x.sample_rate_hz() != scene.sample_rate_hz()) throw ConfigError("sample rate mismatch");
}
}  // namespace

dsp::Signal disturbance(const dsp::Signal& x, const AcousticScene& scene) {
  check_rate(x, scene);
  return dsp::convolve(x, scene.primary());
}

dsp::Signal filtered_reference(const dsp::Signal& x, const AcousticScene& scene) {
  check_rate(x, scene);
  return dsp::convolve(x, scene.secondary_estimate());
}

dsp::Signal apply_control(const dsp::Signal& filtered, const dsp::FirFilter& w,
                          std::size_t expected_length) {
  if (expected_length != 0 && w.size() != expected_length) {
    throw ConfigError("control length mismatch");
  }
  return dsp::convolve(filtered, w);
}

dsp::Signal residual(const dsp::Signal& d, const dsp::Signal& y) {
  if (d.size() != y.size()) throw Error("residual length mismatch");
  if (d.sample_rate_hz() != y.sample_rate_hz()) throw Error("sample rate mismatch");
  std::vector<double> e(d.size());
  for (std::size_t n = 0; n < e.size(); ++n) e[n] = d[n] - y[n];
  return dsp::Signal(std::move(e), d.sample_rate_hz());
}

}  // namespace anclab::acoustics
