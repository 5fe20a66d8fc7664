#pragma once

#include <cstddef>
#include <cstdint>

#include "anclab/models/generator.hpp"
#include "anclab/nn/layers.hpp"

namespace anclab::models {

enum class TokenPooling { kMean, kFirst, kMax };

// Transformer co-processor. Defaults give the full-size network
// (1,201,152 trainable parameters).
struct E2ECfgConfig {
  std::size_t d_model = 256;  // also the conv front-end channel count
  std::size_t heads = 8;
  std::size_t d_ff = 1024;
  std::size_t conv_kernel = 64;
  std::size_t conv_stride = 4;
  std::size_t conv_padding = 30;
  std::size_t pool_kernel = 4;
  std::size_t pool_stride = 4;
  std::size_t pos_max_len = 912;
  std::size_t head_hidden = 512;
  std::size_t filter_len = 512;
  double dropout = 0.1;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double ln_eps = 1e-5;
  TokenPooling pooling = TokenPooling::kMean;
  std::size_t min_frame_len = 1024;

  // conv then max-pool output lengths for a frame of `frame_len` samples.
  std::size_t conv_length(std::size_t frame_len) const;
  std::size_t token_count(std::size_t frame_len) const;
};

// conv1d(1 -> d_model) + batch-norm + ReLU + max-pool, sinusoidal positions,
// one pre-norm encoder layer, token pooling, then
// linear(d_model -> head_hidden) + ReLU + dropout + linear(head_hidden -> N).
template <typename T>
class E2ECfgModel final : public FilterGenerator<T> {
 public:
  E2ECfgModel(const E2ECfgConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kE2ECfg; }
  std::size_t filter_length() const override { return config_.filter_len; }
  void check_frame_length(std::size_t frame_len) const override;
  nn::Tensor<T> generate(nn::Context<T>& ctx, const nn::Tensor<T>& frames) override;
  nn::ParamList<T> parameters() const override;

  // Token sequence after the front end and positional encoding, (B, S, D).
  nn::Tensor<T> tokens(nn::Context<T>& ctx, const nn::Tensor<T>& frames);

  const E2ECfgConfig& config() const { return config_; }
  nn::TransformerEncoderLayer<T>& encoder() { return encoder_; }

 private:
  E2ECfgConfig config_;
  nn::Conv1d<T> conv_;
  nn::BatchNorm1d<T> bn_;
  nn::PositionalEncoding<T> positions_;
  nn::TransformerEncoderLayer<T> encoder_;
  nn::Linear<T> fc1_;
  nn::Linear<T> fc2_;
};

extern template class E2ECfgModel<float>;
extern template class E2ECfgModel<double>;

}  // namespace anclab::models
