#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "anclab/nn/tape.hpp"
#include "anclab/nn/tensor.hpp"

namespace anclab::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Elements probed per tensor; 0 probes every element.
  std::size_t max_elements = 0;
  std::uint64_t seed = 7;
  // Relative errors use max(|analytic|, |numeric|, floor * scale) as the
  // denominator, scale being the tensor's max |grad| but at least floor times
  // the max over all targets.
  double floor = 1e-3;
};

struct GradCheckEntry {
  std::string name;
  std::size_t probed = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Compares tape gradients of loss_fn with central differences for every
// tensor in `targets`. loss_fn must be deterministic (reseed any dropout
// stream inside it) and return a scalar.
GradCheckReport grad_check(const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor<double>>>& targets,
                           double tolerance, const GradCheckOptions& options = {});

}  // namespace anclab::nn
