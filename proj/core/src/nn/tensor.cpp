#include "anclab/nn/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "anclab/error.hpp"
#include "anclab/nn/tape.hpp"

namespace anclab::nn {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  storage_->values.assign(numel(shape), T(0));
  storage_->shape = std::move(shape);
  storage_->requires_grad = requires_grad;
  if (requires_grad) storage_->grad.assign(storage_->values.size(), T(0));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  if (values.size() != numel(shape)) {
    throw Error("tensor value count " + std::to_string(values.size()) + " does not match shape " +
                to_string(shape));
  }
  storage_->shape = std::move(shape);
  storage_->values.assign(values.begin(), values.end());
  storage_->requires_grad = requires_grad;
  if (requires_grad) storage_->grad.assign(storage_->values.size(), T(0));
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(storage_->grad.begin(), storage_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw Error("item() on non-scalar tensor " + to_string(shape()));
  return storage_->values[0];
}

template <typename T>
void Tape<T>::backward(Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) throw Error("loss is not scalar");
  if (!loss.requires_grad()) {
    nodes_.clear();
    return;
  }
  loss.grad()[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace anclab::nn
