#pragma once

#include <cstddef>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/signal.hpp"

namespace anclab::fxnlms {

inline constexpr double kWienerRidge = 1e-8;

// Least-squares FIR: argmin_w sum_n (d(n) - sum_k w_k xf(n-k))^2 with a
// Tikhonov ridge of kWienerRidge * trace(R) / filter_len. Requires
// |xf| >= 4 * filter_len. Throws "rank deficient" if the solve fails.
dsp::FirFilter wiener_solve(const dsp::Signal& filtered, const dsp::Signal& d,
                            std::size_t filter_len);

// Steady-state optimum for reference x through `scene`.
dsp::FirFilter wiener_oracle(const dsp::Signal& x, const acoustics::AcousticScene& scene,
                             std::size_t filter_len);

}  // namespace anclab::fxnlms
