#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/signal.hpp"
#include "anclab/models/generator.hpp"
#include "anclab/models/subfilter_bank.hpp"
#include "anclab/nn/layers.hpp"

namespace anclab::models {

// CNN co-processor predicting sigmoid weights over a sub-filter bank.
// Defaults give 210,703 trainable parameters.
struct GfancConfig {
  std::size_t channels = 128;
  std::size_t conv_kernel = 80;
  std::size_t conv_stride = 4;
  std::size_t conv_padding = 38;
  std::size_t pool_kernel = 4;
  std::size_t pool_stride = 4;
  std::size_t block_kernel = 3;
  std::size_t blocks = 2;
  std::size_t subfilters = 15;
  std::size_t filter_len = 512;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  std::size_t conv_length(std::size_t frame_len) const;
  std::size_t pooled_length(std::size_t frame_len) const;
};

// conv(k, pad k/2) + BN + ReLU + conv + BN, identity shortcut, ReLU after the add.
template <typename T>
struct ResidualBlock {
  ResidualBlock() = default;
  ResidualBlock(std::size_t channels, std::size_t kernel, double momentum, double eps,
                dsp::Rng& rng);

  nn::Tensor<T> forward(nn::Context<T>& ctx, const nn::Tensor<T>& x);
  void collect(const std::string& prefix, nn::ParamList<T>& out) const;

  nn::Conv1d<T> conv1, conv2;
  nn::BatchNorm1d<T> bn1, bn2;
};

template <typename T>
class GfancModel final : public FilterGenerator<T> {
 public:
  GfancModel(const GfancConfig& config, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kGfanc; }
  std::size_t filter_length() const override { return config_.filter_len; }
  void check_frame_length(std::size_t frame_len) const override;
  // Sigmoid(weights) times the bank matrix, (B, N).
  nn::Tensor<T> generate(nn::Context<T>& ctx, const nn::Tensor<T>& frames) override;
  // Parameters, batch-norm buffers, then "bank.sub.<i>" and "bank.source".
  nn::ParamList<T> parameters() const override;

  // Combination weights in (0, 1), (B, M).
  nn::Tensor<T> weights(nn::Context<T>& ctx, const nn::Tensor<T>& frames);

  // Throws unless the bank has config().subfilters filters of filter_len taps.
  void set_bank(const SubFilterBank& bank);
  SubFilterBank bank() const;

  const GfancConfig& config() const { return config_; }

 private:
  GfancConfig config_;
  nn::Conv1d<T> conv_;
  nn::BatchNorm1d<T> bn_;
  std::vector<ResidualBlock<T>> blocks_;
  nn::Linear<T> fc_;
  std::vector<nn::Tensor<T>> subs_;  // M tensors of shape (N)
  nn::Tensor<T> source_;
};

// Single-frame convenience: weights from the model in eval mode, then the
// combined filter in 64-bit.
dsp::FirFilter gfanc_forward(GfancModel<double>& model, const SubFilterBank& bank,
                             const dsp::Signal& frame);

extern template struct ResidualBlock<float>;
extern template struct ResidualBlock<double>;
extern template class GfancModel<float>;
extern template class GfancModel<double>;

}  // namespace anclab::models
