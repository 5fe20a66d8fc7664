#pragma once

#include <cstddef>
#include <string>

#include "anclab/nn/layers.hpp"

namespace anclab::models {

enum class ModelKind { kE2ECfg, kGfanc };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// A co-processor mapping reference frames (B, L) to control filters (B, N).
template <typename T>
class FilterGenerator {
 public:
  virtual ~FilterGenerator() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t filter_length() const = 0;
  // Throws ConfigError when the model cannot consume frames of this length.
  virtual void check_frame_length(std::size_t frame_len) const = 0;
  virtual nn::Tensor<T> generate(nn::Context<T>& ctx, const nn::Tensor<T>& frames) = 0;
  // Trainable parameters followed by persistent buffers, in canonical order.
  virtual nn::ParamList<T> parameters() const = 0;
};

template <typename T>
std::size_t param_count(const FilterGenerator<T>& model) {
  return nn::count_trainable(model.parameters());
}

}  // namespace anclab::models
