#include "anclab/fxnlms/fxnlms.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "anclab/acoustics/plant.hpp"
#include "anclab/error.hpp"

namespace anclab::fxnlms {

FxnlmsResult fxnlms_run(const dsp::Signal& x, const acoustics::AcousticScene& scene,
                        const FxnlmsOptions& options) {
  if (!(options.mu >= 0.0)) throw ConfigError("mu must be non-negative");
  if (options.filter_len == 0) throw ConfigError("filter_len must be positive");
  if (x.empty()) throw ConfigError("empty reference");

  const dsp::Signal d = acoustics::disturbance(x, scene);
  const dsp::Signal xf = acoustics::filtered_reference(x, scene);
  const std::size_t n_taps = options.filter_len;
  const std::size_t total = x.size();
  const std::span<const double> s = scene.secondary().taps();

  // Zero-prefixed copies so history windows never leave the buffer:
  // xpad[n + n_taps - 1 - k] = x(n - k).
  std::vector<double> xpad(n_taps - 1 + total, 0.0);
  std::vector<double> xfpad(n_taps - 1 + total, 0.0);
  std::copy(x.samples().begin(), x.samples().end(), xpad.begin() + static_cast<std::ptrdiff_t>(n_taps - 1));
  std::copy(xf.samples().begin(), xf.samples().end(), xfpad.begin() + static_cast<std::ptrdiff_t>(n_taps - 1));
  std::vector<double> upad(s.size() - 1 + total, 0.0);

  std::vector<double> w(n_taps, 0.0);
  std::vector<double> y(total), e(total);
  FxnlmsResult result;

  for (std::size_t n = 0; n < total; ++n) {
    const double* xh = xpad.data() + n + n_taps - 1;  // xh[-k] = x(n - k)
    double u = 0.0;
    for (std::size_t k = 0; k < n_taps; ++k) u += w[k] * xh[-static_cast<std::ptrdiff_t>(k)];
    upad[n + s.size() - 1] = u;

    const double* uh = upad.data() + n + s.size() - 1;
    double yn = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) yn += s[k] * uh[-static_cast<std::ptrdiff_t>(k)];
    y[n] = yn;
    e[n] = d[n] - yn;

    const double* xfh = xfpad.data() + n + n_taps - 1;
    double step = options.mu * e[n];
    if (options.normalized) {
      double norm = 0.0;
      for (std::size_t k = 0; k < n_taps; ++k) {
        const double v = xfh[-static_cast<std::ptrdiff_t>(k)];
        norm += v * v;
      }
      step /= options.eps + norm;
    }
    bool finite = true;
    for (std::size_t k = 0; k < n_taps; ++k) {
      w[k] += step * xfh[-static_cast<std::ptrdiff_t>(k)];
      finite = finite && std::isfinite(w[k]);
    }
    if (!finite || !std::isfinite(e[n])) throw Error("diverged at sample " + std::to_string(n));

    if (options.trace_stride != 0 && n % options.trace_stride == 0) {
      result.w_trace.push_back({n, w});
    }
  }

  result.d = d;
  result.y = dsp::Signal(std::move(y), x.sample_rate_hz());
  result.e = dsp::Signal(std::move(e), x.sample_rate_hz());
  result.w_final = dsp::FirFilter(std::move(w));
  return result;
}

void write_trace_csv(std::ostream& out, const std::vector<WeightSnapshot>& trace) {
  out << "sample_index,tap_index,value\n";
  for (const auto& snap : trace) {
    for (std::size_t k = 0; k < snap.w.size(); ++k) {
      out << fmt::format("{},{},{}\n", snap.sample_index, k, snap.w[k]);
    }
  }
}

}  // namespace anclab::fxnlms
