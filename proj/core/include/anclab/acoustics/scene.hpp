#pragma once

#include <cstddef>

#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/rng.hpp"

namespace anclab::acoustics {

// Parameters of a synthetic plant. Each path is `delay` zero taps followed by
// an odd-length band-pass FIR.
struct SceneConfig {
  double sample_rate_hz = 13000.0;
  double band_low_hz = 10.0;
  double band_high_hz = 3000.0;
  std::size_t primary_taps = 255;
  std::size_t primary_delay = 40;
  std::size_t secondary_taps = 127;
  std::size_t secondary_delay = 10;
  // Energy of the secondary-path estimate error relative to ||S||^2.
  double estimate_error = 0.0;
};

// Primary path P, secondary path S and its model S_hat. Immutable after
// construction.
class AcousticScene {
 public:
  // Throws "non-causal scene" when P's acoustic delay is shorter than S's.
  AcousticScene(dsp::FirFilter primary, dsp::FirFilter secondary,
                dsp::FirFilter secondary_estimate, double sample_rate_hz);

  const dsp::FirFilter& primary() const { return primary_; }
  const dsp::FirFilter& secondary() const { return secondary_; }
  const dsp::FirFilter& secondary_estimate() const { return secondary_estimate_; }
  double sample_rate_hz() const { return sample_rate_hz_; }

 private:
  dsp::FirFilter primary_;
  dsp::FirFilter secondary_;
  dsp::FirFilter secondary_estimate_;
  double sample_rate_hz_;
};

// Taps are rounded to float32 so the scene survives the checkpoint format
// losslessly.
AcousticScene synthesize_scene(const SceneConfig& config, dsp::RngSpec rng);

}  // namespace anclab::acoustics
