#include "anclab/models/subfilter_bank.hpp"

#include <algorithm>
#include <complex>

#include "anclab/error.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/fxnlms/wiener.hpp"

namespace anclab::models {

std::size_t band_of_bin(std::size_t k, std::size_t n, std::size_t bands) {
  const std::size_t half = n / 2;
  if (half == 0) return 0;
  return std::min(bands - 1, k * bands / half);
}

SubFilterBank build_subfilter_bank(const dsp::FirFilter& wideband, std::size_t bands) {
  if (bands < 1 || bands > kMaxSubFilters) {
    throw ConfigError("sub-filter count " + std::to_string(bands) + " outside [1, " +
                      std::to_string(kMaxSubFilters) + "]");
  }
  SubFilterBank bank;
  bank.source = wideband;
  if (bands == 1) {
    bank.sub_filters.push_back(wideband);
    return bank;
  }
  const std::size_t n = wideband.size();
  const auto spectrum = dsp::dft(wideband.taps());
  std::vector<std::size_t> owner(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t mirrored = k <= n / 2 ? k : n - k;
    owner[k] = band_of_bin(mirrored, n, bands);
  }
  std::vector<std::complex<double>> masked(n);
  for (std::size_t b = 0; b < bands; ++b) {
    for (std::size_t k = 0; k < n; ++k) masked[k] = owner[k] == b ? spectrum[k] : 0.0;
    bank.sub_filters.emplace_back(dsp::inverse_dft_real(masked));
  }
  return bank;
}

dsp::FirFilter combine(const SubFilterBank& bank, std::span<const double> g) {
  if (g.size() != bank.size()) {
    throw Error("combination weights: got " + std::to_string(g.size()) + ", bank has " +
                std::to_string(bank.size()));
  }
  std::vector<double> out(bank.filter_length(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto taps = bank.sub_filters[i].taps();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += g[i] * taps[k];
  }
  return dsp::FirFilter(std::move(out));
}

dsp::FirFilter pretrain_wideband_filter(const acoustics::AcousticScene& scene, dsp::RngSpec rng,
                                        const PretrainOptions& options) {
  const dsp::Signal x = dsp::generate_bandlimited_noise(
      options.low_hz, options.high_hz, options.duration_s, scene.sample_rate_hz(), rng);
  if (!options.use_fxnlms) return fxnlms::wiener_oracle(x, scene, options.filter_len);
  fxnlms::FxnlmsOptions fx;
  fx.mu = options.fxnlms_mu;
  fx.filter_len = options.filter_len;
  return fxnlms::fxnlms_run(x, scene, fx).w_final;
}

}  // namespace anclab::models
