#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "anclab/dsp/fir.hpp"

namespace anclab::training {

enum class LossMode { kUniform, kWeighted };

// Per-sample loss weights alpha_n = lambda^(T-1-n), so the end of a frame
// weighs most. `reversed` flips the orientation to lambda^n.
struct LossWeights {
  std::vector<double> alpha;
  double lambda = 1.0;

  static LossWeights uniform(std::size_t length);
  static LossWeights forgetting(std::size_t length, double lambda, bool reversed = false);
};

LossWeights make_loss_weights(LossMode mode, std::size_t length, double lambda, bool reversed);

// (1/T) sum_n alpha_n e(n)^2. Throws on a length mismatch.
double loss_frame(std::span<const double> e, const LossWeights& weights);
double loss_frame(std::span<const double> e);

// dL/dw_k = -(2/T) sum_n alpha_n e(n) x'(n - k) for k < filter_len, with
// x' taken as zero before the frame.
std::vector<double> filter_grad_oracle(std::span<const double> e, std::span<const double> filtered,
                                       const LossWeights& weights, std::size_t filter_len);

}  // namespace anclab::training
