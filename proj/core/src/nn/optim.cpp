#include "anclab/nn/optim.hpp"

#include <cmath>

#include "anclab/error.hpp"

namespace anclab::nn {

template <typename T>
Adam<T>::Adam(const ParamList<T>& params, AdamOptions options) : options_(options) {
  for (const auto& p : params) {
    if (!p.trainable) continue;
    params_.push_back(p.tensor);
    names_.push_back(p.name);
    m_.emplace_back(p.tensor.size(), T(0));
    v_.emplace_back(p.tensor.size(), T(0));
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Adam<T>::step() {
  for (const auto& p : params_) {
    for (T g : p.grad()) {
      if (!std::isfinite(g)) throw Error("non-finite gradient");
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].values();
    auto grads = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      double p = values[j];
      double g = grads[j];
      if (options_.decoupled_weight_decay) {
        p -= options_.lr * options_.weight_decay * p;
      } else {
        g += options_.weight_decay * p;
      }
      const double mj = b1 * m[j] + (1.0 - b1) * g;
      const double vj = b2 * v[j] + (1.0 - b2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double m_hat = mj / correction1;
      const double v_hat = vj / correction2;
      p -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
      values[j] = static_cast<T>(p);
    }
  }
}

template <typename T>
void Adam<T>::restore(std::uint64_t step, std::vector<std::vector<T>> m,
                      std::vector<std::vector<T>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw Error("optimizer state size mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != m_[i].size() || v[i].size() != v_[i].size()) {
      throw Error("optimizer state shape mismatch for " + names_[i]);
    }
  }
  step_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

double steplr(double lr0, std::size_t step_size, double gamma, std::size_t epoch) {
  if (step_size == 0) throw ConfigError("step_size must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  return lr0 * std::pow(gamma, static_cast<double>(epoch / step_size));
}

template <typename T>
double clip_grad_norm(const ParamList<T>& params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    for (T g : p.tensor.grad()) total += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(total);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.trainable) continue;
      Tensor<T> t = p.tensor;
      for (T& g : t.grad()) g = static_cast<T>(g * scale);
    }
  }
  return norm;
}

template class Adam<float>;
template class Adam<double>;
template double clip_grad_norm(const ParamList<float>&, double);
template double clip_grad_norm(const ParamList<double>&, double);

}  // namespace anclab::nn
