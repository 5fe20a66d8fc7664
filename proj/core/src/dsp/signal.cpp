#include "anclab/dsp/signal.hpp"

#include <cmath>
#include <numeric>

#include "anclab/error.hpp"

namespace anclab::dsp {

Signal::Signal(std::vector<double> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
    throw ConfigError("sample rate must be positive");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw Error("non-finite sample at index " + std::to_string(i));
    }
  }
}

Signal Signal::zeros(std::size_t n, double sample_rate_hz) {
  return Signal(std::vector<double>(n, 0.0), sample_rate_hz);
}

Signal Signal::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > samples_.size()) throw Error("slice out of range");
  return Signal(std::vector<double>(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                    samples_.begin() + static_cast<std::ptrdiff_t>(end)),
                sample_rate_hz_);
}

double energy(std::span<const double> x) {
  return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

double mean_power(std::span<const double> x) {
  return x.empty() ? 0.0 : energy(x) / static_cast<double>(x.size());
}

double rms(std::span<const double> x) { return std::sqrt(mean_power(x)); }

}  // namespace anclab::dsp
