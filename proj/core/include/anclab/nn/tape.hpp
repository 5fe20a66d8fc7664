#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "anclab/nn/tensor.hpp"

namespace anclab::nn {

// Ordered record of backward closures. Ops append one entry per output that
// requires grad; backward() replays them in reverse, which is a valid
// topological order because every op is recorded after its inputs exist.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1, visits every node once in reverse order and
  // clears the tape. Throws if `loss` is not a scalar.
  void backward(Tensor<T>& loss);

 private:
  std::vector<BackwardFn> nodes_;
  bool recording_ = true;
};

extern template class Tape<float>;
extern template class Tape<double>;

// Disables recording for the lifetime of the guard.
template <typename T>
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape<T>& tape) : tape_(tape), previous_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoGradGuard() { tape_.set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>& tape_;
  bool previous_;
};

}  // namespace anclab::nn
