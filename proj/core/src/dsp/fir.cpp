#include "anclab/dsp/fir.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anclab/error.hpp"

namespace anclab::dsp {

FirFilter::FirFilter(std::vector<double> taps) : taps_(std::move(taps)) {
  if (taps_.empty()) throw ConfigError("empty filter");
  for (double t : taps_) {
    if (!std::isfinite(t)) throw Error("non-finite filter tap");
  }
}

FirFilter FirFilter::impulse(std::size_t length, std::size_t delay) {
  if (delay >= length) throw ConfigError("impulse delay exceeds filter length");
  std::vector<double> taps(length, 0.0);
  taps[delay] = 1.0;
  return FirFilter(std::move(taps));
}

FirFilter FirFilter::zeros(std::size_t length) {
  return FirFilter(std::vector<double>(length, 0.0));
}

std::size_t FirFilter::first_nonzero() const {
  const auto it = std::find_if(taps_.begin(), taps_.end(), [](double t) { return t != 0.0; });
  return static_cast<std::size_t>(it - taps_.begin());
}

void convolve_same(std::span<const double> x, std::span<const double> h, std::span<double> out) {
  if (h.empty()) throw ConfigError("empty filter");
  if (out.size() != x.size()) throw Error("convolution output length mismatch");
  const std::size_t taps = h.size();
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(n + 1, taps);
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    out[n] = acc;
  }
}

Signal convolve(const Signal& x, std::span<const double> h) {
  if (x.empty()) throw ConfigError("empty signal");
  std::vector<double> out(x.size());
  convolve_same(x.samples(), h, out);
  return Signal(std::move(out), x.sample_rate_hz());
}

Signal convolve(const Signal& x, const FirFilter& h) { return convolve(x, h.taps()); }

std::complex<double> frequency_response(std::span<const double> taps, double freq_hz,
                                        double sample_rate_hz) {
  const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const double phase = -omega * static_cast<double>(k);
    acc += taps[k] * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return acc;
}

FirFilter design_bandpass_fir(double low_hz, double high_hz, std::size_t num_taps,
                              double sample_rate_hz) {
  if (!(low_hz > 0.0) || !(high_hz > low_hz) || !(high_hz < sample_rate_hz / 2.0)) {
    throw ConfigError("invalid band");
  }
  if (num_taps == 0 || num_taps % 2 == 0) throw ConfigError("num_taps must be odd and positive");

  const double fl = low_hz / sample_rate_hz;
  const double fh = high_hz / sample_rate_hz;
  const auto centre = static_cast<double>(num_taps - 1) / 2.0;
  auto lowpass = [](double fc, double m) {
    if (m == 0.0) return 2.0 * fc;
    const double arg = 2.0 * std::numbers::pi * fc * m;
    return std::sin(arg) / (std::numbers::pi * m);
  };

  std::vector<double> taps(num_taps);
  for (std::size_t n = 0; n < num_taps; ++n) {
    const double m = static_cast<double>(n) - centre;
    const double window =
        num_taps == 1
            ? 1.0
            : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                     static_cast<double>(num_taps - 1));
    taps[n] = (lowpass(fh, m) - lowpass(fl, m)) * window;
  }
  // Exact symmetry, independent of sin() rounding on mirrored arguments.
  for (std::size_t n = 0; n < num_taps / 2; ++n) taps[num_taps - 1 - n] = taps[n];

  const double gain =
      std::abs(frequency_response(taps, 0.5 * (low_hz + high_hz), sample_rate_hz));
  if (!(gain > 0.0)) throw ConfigError("invalid band");
  for (double& t : taps) t /= gain;
  return FirFilter(std::move(taps));
}

std::vector<std::complex<double>> dft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(phase), std::sin(phase)};
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * twiddle[(k * t) % n];
    out[k] = acc;
  }
  return out;
}

std::vector<double> inverse_dft_real(std::span<const std::complex<double>> spectrum) {
  const std::size_t n = spectrum.size();
  std::vector<std::complex<double>> twiddle(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(phase), std::sin(phase)};
  }
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) acc += spectrum[k] * twiddle[(k * t) % n];
    out[t] = acc.real() / static_cast<double>(n);
  }
  return out;
}

}  // namespace anclab::dsp
