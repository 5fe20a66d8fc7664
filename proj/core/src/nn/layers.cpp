#include "anclab/nn/layers.hpp"

#include <cmath>

#include "anclab/error.hpp"

namespace anclab::nn {
namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, dsp::Rng& rng) {
  std::vector<T> values(numel(shape));
  for (T& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(values), true);
}

}  // namespace

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features, dsp::Rng& rng, bool with_bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  weight = uniform_tensor<T>({out_features, in_features}, bound, rng);
  if (with_bias) bias = uniform_tensor<T>({out_features}, bound, rng);
}

template <typename T>
Tensor<T> Linear<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  return linear(ctx.tape, x, weight, bias);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

template <typename T>
Conv1d<T>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride_, std::size_t padding_, dsp::Rng& rng)
    : stride(stride_), padding(padding_) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * kernel));
  weight = uniform_tensor<T>({out_channels, in_channels, kernel}, bound, rng);
  bias = uniform_tensor<T>({out_channels}, bound, rng);
}

template <typename T>
Tensor<T> Conv1d<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  return conv1d(ctx.tape, x, weight, bias, stride, padding);
}

template <typename T>
void Conv1d<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

template <typename T>
std::size_t Conv1d<T>::output_length(std::size_t input_length) const {
  const std::size_t kernel = weight.dim(2);
  if (input_length + 2 * padding < kernel) return 0;
  return (input_length + 2 * padding - kernel) / stride + 1;
}

template <typename T>
BatchNorm1d<T>::BatchNorm1d(std::size_t channels, double momentum_, double eps_)
    : weight(Shape{channels}, std::vector<T>(channels, T(1)), true),
      bias(Shape{channels}, true),
      running_mean(Shape{channels}),
      running_var(Shape{channels}, std::vector<T>(channels, T(1))),
      momentum(momentum_),
      eps(eps_) {}

template <typename T>
Tensor<T> BatchNorm1d<T>::forward(Context<T>& ctx, const Tensor<T>& x) {
  return batch_norm1d(ctx.tape, x, weight, bias, running_mean, running_var, ctx.training(),
                      momentum, eps);
}

template <typename T>
void BatchNorm1d<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
  out.push_back({prefix + ".running_mean", running_mean, false});
  out.push_back({prefix + ".running_var", running_var, false});
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t dim, double eps_)
    : weight(Shape{dim}, std::vector<T>(dim, T(1)), true), bias(Shape{dim}, true), eps(eps_) {}

template <typename T>
Tensor<T> LayerNorm<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  return layer_norm(ctx.tape, x, weight, bias, eps);
}

template <typename T>
void LayerNorm<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

template <typename T>
PositionalEncoding<T>::PositionalEncoding(std::size_t max_len_, std::size_t d_model_)
    : table(max_len_ * d_model_), max_len(max_len_), d_model(d_model_) {
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      table[pos * d_model + i] = static_cast<T>(std::sin(angle));
      if (i + 1 < d_model) table[pos * d_model + i + 1] = static_cast<T>(std::cos(angle));
    }
  }
}

template <typename T>
Tensor<T> PositionalEncoding<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(2) != d_model) {
    throw Error("shape mismatch in positional_encoding: input " + to_string(x.shape()) +
                ", expected (B, S, " + std::to_string(d_model) + ")");
  }
  if (x.dim(1) > max_len) {
    throw Error("sequence exceeds positional encoding: " + std::to_string(x.dim(1)) + " tokens > " +
                std::to_string(max_len));
  }
  return add_rows(ctx.tape, x, std::span<const T>(table));
}

template <typename T>
MultiHeadSelfAttention<T>::MultiHeadSelfAttention(std::size_t d_model, std::size_t heads_,
                                                  dsp::Rng& rng)
    : heads(heads_) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by heads " +
                      std::to_string(heads));
  }
  q = Linear<T>(d_model, d_model, rng);
  k = Linear<T>(d_model, d_model, rng);
  v = Linear<T>(d_model, d_model, rng);
  o = Linear<T>(d_model, d_model, rng);
}

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  const Tensor<T> ctxv = attention(ctx.tape, q.forward(ctx, x), k.forward(ctx, x),
                                   v.forward(ctx, x), heads);
  return o.forward(ctx, ctxv);
}

template <typename T>
void MultiHeadSelfAttention<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  q.collect(prefix + ".q", out);
  k.collect(prefix + ".k", out);
  v.collect(prefix + ".v", out);
  o.collect(prefix + ".o", out);
}

template <typename T>
FeedForward<T>::FeedForward(std::size_t d_model, std::size_t d_ff, dsp::Rng& rng)
    : fc1(d_model, d_ff, rng), fc2(d_ff, d_model, rng) {}

template <typename T>
Tensor<T> FeedForward<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  return fc2.forward(ctx, relu(ctx.tape, fc1.forward(ctx, x)));
}

template <typename T>
void FeedForward<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  fc1.collect(prefix + ".fc1", out);
  fc2.collect(prefix + ".fc2", out);
}

template <typename T>
TransformerEncoderLayer<T>::TransformerEncoderLayer(std::size_t d_model, std::size_t heads,
                                                    std::size_t d_ff, double dropout_,
                                                    double ln_eps, dsp::Rng& rng)
    : ln1(d_model, ln_eps),
      ln2(d_model, ln_eps),
      attn(d_model, heads, rng),
      ff(d_model, d_ff, rng),
      dropout(dropout_) {}

template <typename T>
Tensor<T> TransformerEncoderLayer<T>::forward(Context<T>& ctx, const Tensor<T>& x) const {
  const bool train = ctx.training();
  Tensor<T> a = attn.forward(ctx, ln1.forward(ctx, x));
  const Tensor<T> h = add(ctx.tape, x, nn::dropout(ctx.tape, a, dropout, train, ctx.rng));
  Tensor<T> f = ff.forward(ctx, ln2.forward(ctx, h));
  return add(ctx.tape, h, nn::dropout(ctx.tape, f, dropout, train, ctx.rng));
}

template <typename T>
void TransformerEncoderLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  ln1.collect(prefix + ".ln1", out);
  attn.collect(prefix + ".attn", out);
  ln2.collect(prefix + ".ln2", out);
  ff.collect(prefix + ".ff", out);
}

template struct Linear<float>;
template struct Linear<double>;
template struct Conv1d<float>;
template struct Conv1d<double>;
template struct BatchNorm1d<float>;
template struct BatchNorm1d<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct PositionalEncoding<float>;
template struct PositionalEncoding<double>;
template struct MultiHeadSelfAttention<float>;
template struct MultiHeadSelfAttention<double>;
template struct FeedForward<float>;
template struct FeedForward<double>;
template struct TransformerEncoderLayer<float>;
template struct TransformerEncoderLayer<double>;

}  // namespace anclab::nn
