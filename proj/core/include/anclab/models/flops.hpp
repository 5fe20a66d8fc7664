#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "anclab/models/e2ecfg.hpp"
#include "anclab/models/gfanc.hpp"

namespace anclab::models {

// One forward pass, batch 1. A multiply-accumulate is 2 FLOPs.
//
// Two totals are reported. `full_total` counts every layer: conv, linear and
// attention products at 2 per MAC, batch-norm at 2 per element, layer-norm at
// 5 per element, and pooling/activation/softmax/elementwise adds at 1 per
// element. `total` follows the convention of common module-hook profilers:
// conv1d and nn.Linear modules called directly by the model, plus the two
// attention products (QK^T and PV). Projections and the feed-forward inside a
// fused encoder layer, norms and elementwise work are skipped there.
struct LayerFlops {
  std::string name;
  std::string group;  // front, attention, feedforward, blocks, head, norm, elementwise
  double flops = 0.0;
  bool profiled = false;
};

struct FlopsReport {
  std::vector<LayerFlops> layers;
  double total = 0.0;
  double full_total = 0.0;

  std::map<std::string, double> group_totals(bool profiled_only) const;
  // Group with the largest share, ties broken by name.
  std::string largest_group(bool profiled_only) const;
};

FlopsReport flops_estimate(const E2ECfgConfig& config, std::size_t frame_len);
FlopsReport flops_estimate(const GfancConfig& config, std::size_t frame_len);

}  // namespace anclab::models
