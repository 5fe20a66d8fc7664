#pragma once

#include <cstddef>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/signal.hpp"

namespace anclab::acoustics {

// d = x * P
dsp::Signal disturbance(const dsp::Signal& x, const AcousticScene& scene);

// x' = x * S_hat
dsp::Signal filtered_reference(const dsp::Signal& x, const AcousticScene& scene);

// y(n) = sum_k w_k x'(n - k). `expected_length` of 0 skips the length check.
dsp::Signal apply_control(const dsp::Signal& filtered, const dsp::FirFilter& w,
                          std::size_t expected_length = 0);

// e = d - y
dsp::Signal residual(const dsp::Signal& d, const dsp::Signal& y);

}  // namespace anclab::acoustics
