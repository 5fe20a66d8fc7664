#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace anclab::dsp {

// A finite, real, uniformly sampled waveform.
class Signal {
 public:
  Signal() = default;
  // Throws ConfigError on non-finite samples or a non-positive rate.
  Signal(std::vector<double> samples, double sample_rate_hz);

  static Signal zeros(std::size_t n, double sample_rate_hz);

  std::span<const double> samples() const { return samples_; }
  const std::vector<double>& vector() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  double sample_rate_hz() const { return sample_rate_hz_; }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }
  double operator[](std::size_t i) const { return samples_[i]; }

  // Samples [begin, end).
  Signal slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<double> samples_;
  double sample_rate_hz_ = 1.0;
};

// Half-open sample interval.
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

double energy(std::span<const double> x);
double mean_power(std::span<const double> x);
double rms(std::span<const double> x);

}  // namespace anclab::dsp
