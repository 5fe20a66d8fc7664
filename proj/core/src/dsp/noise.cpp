#include "anclab/dsp/noise.hpp"

#include <cmath>
#include <vector>

#include "anclab/dsp/fir.hpp"
#include "anclab/error.hpp"

namespace anclab::dsp {

Signal generate_white_noise(std::size_t length, RngSpec spec, double sample_rate_hz) {
  if (length == 0) throw ConfigError("noise length must be positive");
  Rng rng(spec);
  std::vector<double> out(length);
  for (double& v : out) v = rng.normal();
  return Signal(std::move(out), sample_rate_hz);
}

Signal generate_bandlimited_noise(double low_hz, double high_hz, double duration_s,
                                  double sample_rate_hz, RngSpec rng, std::size_t num_taps) {
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  const FirFilter bandpass = design_bandpass_fir(low_hz, high_hz, num_taps, sample_rate_hz);
  const auto length = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  if (length == 0) throw ConfigError("duration shorter than one sample");

  const std::size_t warmup = num_taps - 1;
  const Signal white = generate_white_noise(length + warmup, rng, sample_rate_hz);
  std::vector<double> filtered(white.size());
  convolve_same(white.samples(), bandpass.taps(), filtered);

  std::vector<double> out(filtered.begin() + static_cast<std::ptrdiff_t>(warmup), filtered.end());
  const double level = rms(out);
  if (!(level > 0.0)) throw Error("band-limited noise is silent");
  for (double& v : out) v /= level;
  return Signal(std::move(out), sample_rate_hz);
}

Signal mix_at_snr(const Signal& clean, RngSpec rng, double snr_db) {
  const double p_clean = mean_power(clean.samples());
  if (!(p_clean > 0.0)) throw ConfigError("silent signal");
  if (std::isinf(snr_db) && snr_db > 0.0) return clean;

  const Signal noise = generate_white_noise(clean.size(), rng, clean.sample_rate_hz());
  const double p_noise = mean_power(noise.samples());
  const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clean[i] + gain * noise[i];
  return Signal(std::move(out), clean.sample_rate_hz());
}

}  // namespace anclab::dsp
