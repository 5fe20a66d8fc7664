#pragma once

#include <cstddef>
#include <limits>

#include "anclab/dsp/rng.hpp"
#include "anclab/dsp/signal.hpp"

namespace anclab::dsp {

inline constexpr std::size_t kNoiseFilterTaps = 1025;
// Pass as snr_db to mix_at_snr to disable noise injection.
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

Signal generate_white_noise(std::size_t length, RngSpec rng, double sample_rate_hz = 1.0);

// White noise through design_bandpass_fir(low, high, num_taps), started after
// the filter's warm-up so the whole output is stationary, then scaled to unit
// RMS.
Signal generate_bandlimited_noise(double low_hz, double high_hz, double duration_s,
                                  double sample_rate_hz, RngSpec rng,
                                  std::size_t num_taps = kNoiseFilterTaps);

// clean + g * w, w seeded white Gaussian, g chosen so that the clean-to-added
// power ratio equals snr_db. snr_db = +inf returns clean unchanged.
Signal mix_at_snr(const Signal& clean, RngSpec rng, double snr_db);

}  // namespace anclab::dsp
