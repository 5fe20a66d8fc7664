#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "anclab/nn/layers.hpp"
#include "anclab/nn/tensor.hpp"

namespace anclab::nn {

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  // true: decay applied to the parameter directly (AdamW). false: coupled
  // L2, g <- g + weight_decay * p.
  bool decoupled_weight_decay = false;
};

// Bias-corrected Adam over the trainable entries of a ParamList.
template <typename T>
class Adam {
 public:
  Adam(const ParamList<T>& params, AdamOptions options);

  // Throws "non-finite gradient" before touching any parameter.
  void step();
  void zero_grad();

  double lr() const { return options_.lr; }
  void set_lr(double lr) { options_.lr = lr; }
  std::uint64_t step_count() const { return step_; }
  const AdamOptions& options() const { return options_; }

  const std::vector<Tensor<T>>& parameters() const { return params_; }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }
  void restore(std::uint64_t step, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v);

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::string> names_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  AdamOptions options_;
  std::uint64_t step_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

// lr0 * gamma^floor(epoch / step_size)
double steplr(double lr0, std::size_t step_size, double gamma, std::size_t epoch);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm);

}  // namespace anclab::nn
