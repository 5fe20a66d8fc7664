#include "anclab/acoustics/scene.hpp"

#include <cmath>
#include <vector>

#include "anclab/error.hpp"

namespace anclab::acoustics {

AcousticScene::AcousticScene(dsp::FirFilter primary, dsp::FirFilter secondary,
                             dsp::FirFilter secondary_estimate, double sample_rate_hz)
    : primary_(std::move(primary)),
      secondary_(std::move(secondary)),
      secondary_estimate_(std::move(secondary_estimate)),
      sample_rate_hz_(sample_rate_hz) {
  if (!(sample_rate_hz_ > 0.0)) throw ConfigError("sample rate must be positive");
  if (primary_.first_nonzero() < secondary_.first_nonzero()) {
    throw ConfigError("non-causal scene");
  }
}

namespace {

std::vector<double> delayed_bandpass(const SceneConfig& c, std::size_t taps, std::size_t delay) {
  const dsp::FirFilter bp =
      dsp::design_bandpass_fir(c.band_low_hz, c.band_high_hz, taps, c.sample_rate_hz);
  std::vector<double> out(delay, 0.0);
  out.insert(out.end(), bp.vector().begin(), bp.vector().end());
  return out;
}

void round_to_float(std::vector<double>& taps) {
  for (double& t : taps) t = static_cast<double>(static_cast<float>(t));
}

}  // namespace

AcousticScene synthesize_scene(const SceneConfig& config, dsp::RngSpec rng) {
  if (config.primary_taps == 0 || config.secondary_taps == 0) {
    throw ConfigError("path lengths must be positive");
  }
  if (config.secondary_delay >= config.primary_delay) throw ConfigError("non-causal scene");
  if (!(config.estimate_error >= 0.0)) throw ConfigError("estimate_error must be non-negative");

  std::vector<double> primary = delayed_bandpass(config, config.primary_taps, config.primary_delay);
  std::vector<double> secondary =
      delayed_bandpass(config, config.secondary_taps, config.secondary_delay);
  round_to_float(primary);
  round_to_float(secondary);

  std::vector<double> estimate = secondary;
  if (config.estimate_error > 0.0) {
    dsp::Rng gen(dsp::derive(rng, 0x5EC0));
    std::vector<double> delta(secondary.size());
    double delta_energy = 0.0;
    for (double& v : delta) {
      v = gen.normal();
      delta_energy += v * v;
    }
    const double target = config.estimate_error * dsp::energy(secondary);
    const double scale = std::sqrt(target / delta_energy);
    for (std::size_t i = 0; i < estimate.size(); ++i) estimate[i] += scale * delta[i];
    round_to_float(estimate);
  }

  return AcousticScene(dsp::FirFilter(std::move(primary)), dsp::FirFilter(std::move(secondary)),
                       dsp::FirFilter(std::move(estimate)), config.sample_rate_hz);
}

}  // namespace anclab::acoustics
