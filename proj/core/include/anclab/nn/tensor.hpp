#pragma once

#include <cstddef>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace anclab::nn {

using Shape = std::vector<std::size_t>;

// Storage is cache-line aligned. Eigen's vectorized kernels peel a different
// number of leading elements depending on the buffer address, which changes
// the summation order; fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Row-major n-d array with an optional gradient buffer. Tensor is a handle:
// copies share storage, so an op's saved inputs see later in-place updates
// (the optimizer relies on this for parameters).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t size() const { return storage_->values.size(); }

  std::span<T> values() { return storage_->values; }
  std::span<const T> values() const { return storage_->values; }
  T* data() { return storage_->values.data(); }
  const T* data() const { return storage_->values.data(); }

  bool requires_grad() const { return storage_->requires_grad; }
  // Empty span when the tensor does not require grad. The gradient buffer is
  // writable through any handle so backward closures can accumulate into it.
  std::span<T> grad() const { return storage_->grad; }
  void zero_grad();

  T item() const;
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    AlignedVector<T> values;
    AlignedVector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace anclab::nn
