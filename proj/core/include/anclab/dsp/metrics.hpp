#pragma once

#include "anclab/dsp/signal.hpp"

namespace anclab::dsp {

inline constexpr double kDbClamp = 120.0;

// 10 log10(sum num^2 / sum den^2) over `range`, clamped to [-120, 120] dB.
// A zero denominator gives +120 dB; two silent signals give 0 dB.
double power_db_ratio(const Signal& num, const Signal& den, SampleRange range);
double power_db_ratio(std::span<const double> num, std::span<const double> den);

}  // namespace anclab::dsp
