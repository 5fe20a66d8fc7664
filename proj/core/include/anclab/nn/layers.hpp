#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anclab/dsp/rng.hpp"
#include "anclab/nn/ops.hpp"
#include "anclab/nn/tape.hpp"
#include "anclab/nn/tensor.hpp"

namespace anclab::nn {

enum class Mode { kTrain, kEval };

// Per-forward execution state. `rng` drives dropout and may be null in eval
// mode.
template <typename T>
struct Context {
  Tape<T>& tape;
  Mode mode = Mode::kEval;
  dsp::Rng* rng = nullptr;

  bool training() const { return mode == Mode::kTrain; }
};

// A named parameter or buffer. Buffers (batch-norm running statistics) are
// persisted but not trained and not counted.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
std::size_t count_trainable(const ParamList<T>& params) {
  std::size_t total = 0;
  for (const auto& p : params) {
    if (p.trainable) total += p.tensor.size();
  }
  return total;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias.
template <typename T>
struct Linear {
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, dsp::Rng& rng, bool with_bias = true);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
struct Conv1d {
  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t padding, dsp::Rng& rng);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;
  std::size_t output_length(std::size_t input_length) const;

  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

template <typename T>
struct BatchNorm1d {
  BatchNorm1d() = default;
  BatchNorm1d(std::size_t channels, double momentum, double eps);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x);
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

template <typename T>
struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(std::size_t dim, double eps);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Tensor<T> weight;
  Tensor<T> bias;
  double eps = 1e-5;
};

// Fixed sinusoidal table: pe[pos, 2i] = sin(pos / 10000^(2i/d)),
// pe[pos, 2i+1] = cos(pos / 10000^(2i/d)).
template <typename T>
struct PositionalEncoding {
  PositionalEncoding() = default;
  PositionalEncoding(std::size_t max_len, std::size_t d_model);

  // Throws "sequence exceeds positional encoding" past max_len tokens.
  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;

  std::vector<T> table;
  std::size_t max_len = 0;
  std::size_t d_model = 0;
};

template <typename T>
struct MultiHeadSelfAttention {
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(std::size_t d_model, std::size_t heads, dsp::Rng& rng);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Linear<T> q, k, v, o;
  std::size_t heads = 1;
};

template <typename T>
struct FeedForward {
  FeedForward() = default;
  FeedForward(std::size_t d_model, std::size_t d_ff, dsp::Rng& rng);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  Linear<T> fc1, fc2;
};

// Pre-norm layer:
//   h   = x + dropout(attn(ln1(x)))
//   out = h + dropout(ff(ln2(h)))
template <typename T>
struct TransformerEncoderLayer {
  TransformerEncoderLayer() = default;
  TransformerEncoderLayer(std::size_t d_model, std::size_t heads, std::size_t d_ff, double dropout,
                          double ln_eps, dsp::Rng& rng);

  Tensor<T> forward(Context<T>& ctx, const Tensor<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out) const;

  LayerNorm<T> ln1, ln2;
  MultiHeadSelfAttention<T> attn;
  FeedForward<T> ff;
  double dropout = 0.0;
};

extern template struct Linear<float>;
extern template struct Linear<double>;
extern template struct Conv1d<float>;
extern template struct Conv1d<double>;
extern template struct BatchNorm1d<float>;
extern template struct BatchNorm1d<double>;
extern template struct LayerNorm<float>;
extern template struct LayerNorm<double>;
extern template struct PositionalEncoding<float>;
extern template struct PositionalEncoding<double>;
extern template struct MultiHeadSelfAttention<float>;
extern template struct MultiHeadSelfAttention<double>;
extern template struct FeedForward<float>;
extern template struct FeedForward<double>;
extern template struct TransformerEncoderLayer<float>;
extern template struct TransformerEncoderLayer<double>;

}  // namespace anclab::nn
