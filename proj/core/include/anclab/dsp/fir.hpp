#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "anclab/dsp/signal.hpp"

namespace anclab::dsp {

// Causal FIR impulse response. Never empty; all taps finite.
class FirFilter {
 public:
  FirFilter() : taps_{0.0} {}
  explicit FirFilter(std::vector<double> taps);

  static FirFilter impulse(std::size_t length, std::size_t delay = 0);
  static FirFilter zeros(std::size_t length);

  std::span<const double> taps() const { return taps_; }
  const std::vector<double>& vector() const { return taps_; }
  std::size_t size() const { return taps_.size(); }
  std::size_t order() const { return taps_.size() - 1; }
  double operator[](std::size_t k) const { return taps_[k]; }

  // Index of the first nonzero tap, or size() when all taps are zero.
  std::size_t first_nonzero() const;

 private:
  std::vector<double> taps_;
};

// out[n] = sum_{k <= min(n, |h|-1)} h[k] x[n-k]; out has |x| samples.
void convolve_same(std::span<const double> x, std::span<const double> h, std::span<double> out);

// Causal convolution with zero pre-history; output has the input's length.
Signal convolve(const Signal& x, const FirFilter& h);
Signal convolve(const Signal& x, std::span<const double> h);

// Linear-phase band-pass: difference of two ideal low-pass kernels under a
// Hamming window, scaled to unit gain at the band centre. num_taps must be
// odd; 0 < low < high < fs/2.
FirFilter design_bandpass_fir(double low_hz, double high_hz, std::size_t num_taps,
                              double sample_rate_hz);

// Frequency response of `taps` at `freq_hz`.
std::complex<double> frequency_response(std::span<const double> taps, double freq_hz,
                                        double sample_rate_hz);

// Direct N-point DFT and its real-valued inverse (imaginary part dropped).
std::vector<std::complex<double>> dft(std::span<const double> x);
std::vector<double> inverse_dft_real(std::span<const std::complex<double>> spectrum);

}  // namespace anclab::dsp
