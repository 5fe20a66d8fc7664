#include "anclab/training/loss.hpp"

#include <cmath>
#include <string>

#include "anclab/error.hpp"

namespace anclab::training {

LossWeights LossWeights::uniform(std::size_t length) {
  return {std::vector<double>(length, 1.0), 1.0};
}

LossWeights LossWeights::forgetting(std::size_t length, double lambda, bool reversed) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("forgetting factor must be in (0, 1]");
  LossWeights w{std::vector<double>(length), lambda};
  for (std::size_t n = 0; n < length; ++n) {
    const double power = static_cast<double>(reversed ? n : length - 1 - n);
    w.alpha[n] = std::pow(lambda, power);
  }
  return w;
}

LossWeights make_loss_weights(LossMode mode, std::size_t length, double lambda, bool reversed) {
  return mode == LossMode::kUniform ? LossWeights::uniform(length)
                                    : LossWeights::forgetting(length, lambda, reversed);
}

double loss_frame(std::span<const double> e, const LossWeights& weights) {
  if (e.size() != weights.alpha.size()) {
    throw Error("loss weights have " + std::to_string(weights.alpha.size()) + " entries, frame has " +
                std::to_string(e.size()));
  }
  if (e.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t n = 0; n < e.size(); ++n) acc += weights.alpha[n] * e[n] * e[n];
  return acc / static_cast<double>(e.size());
}

double loss_frame(std::span<const double> e) {
  if (e.empty()) return 0.0;
  double acc = 0.0;
  for (double v : e) acc += v * v;
  return acc / static_cast<double>(e.size());
}

std::vector<double> filter_grad_oracle(std::span<const double> e, std::span<const double> filtered,
                                       const LossWeights& weights, std::size_t filter_len) {
  if (e.size() != filtered.size() || e.size() != weights.alpha.size()) {
    throw Error("filter gradient: misaligned residual, reference and weights");
  }
  const std::size_t length = e.size();
  std::vector<double> grad(filter_len, 0.0);
  if (length == 0) return grad;
  const double scale = -2.0 / static_cast<double>(length);
  for (std::size_t k = 0; k < filter_len; ++k) {
    double acc = 0.0;
    for (std::size_t n = k; n < length; ++n) acc += weights.alpha[n] * e[n] * filtered[n - k];
    grad[k] = scale * acc;
  }
  return grad;
}

}  // namespace anclab::training
