#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/rng.hpp"

namespace anclab::models {

inline constexpr std::size_t kMaxSubFilters = 256;

// Frequency-domain partition of a wideband control filter. Sub-filters sum to
// the source exactly (up to DFT round-off).
struct SubFilterBank {
  std::vector<dsp::FirFilter> sub_filters;
  dsp::FirFilter source;

  std::size_t size() const { return sub_filters.size(); }
  std::size_t filter_length() const { return source.size(); }
};

// Band index of DFT bin k (0 <= k <= N/2) when [0, Nyquist] is cut into
// `bands` contiguous equal-width pieces. Nyquist goes to the last band.
std::size_t band_of_bin(std::size_t k, std::size_t n, std::size_t bands);

// Throws ConfigError unless 1 <= bands <= kMaxSubFilters.
SubFilterBank build_subfilter_bank(const dsp::FirFilter& wideband, std::size_t bands);

// sum_i g[i] * sub_filters[i]. Throws on a length mismatch.
dsp::FirFilter combine(const SubFilterBank& bank, std::span<const double> g);

struct PretrainOptions {
  double low_hz = 20.0;
  double high_hz = 1900.0;
  double duration_s = 10.0;
  std::size_t filter_len = 512;
  // Adapt with FxNLMS instead of solving the normal equations.
  bool use_fxnlms = false;
  double fxnlms_mu = 0.001;
};

// Control filter for broadband noise through `scene`, used as the source of the
// GFANC sub-filter bank.
dsp::FirFilter pretrain_wideband_filter(const acoustics::AcousticScene& scene, dsp::RngSpec rng,
                                        const PretrainOptions& options = {});

}  // namespace anclab::models
