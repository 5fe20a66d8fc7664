#include "anclab/models/e2ecfg.hpp"

#include "anclab/error.hpp"

namespace anclab::models {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kE2ECfg ? "e2ecfg" : "gfanc";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "e2ecfg") return ModelKind::kE2ECfg;
  if (name == "gfanc") return ModelKind::kGfanc;
  throw ConfigError("unknown model kind '" + name + "'");
}

std::size_t E2ECfgConfig::conv_length(std::size_t frame_len) const {
  if (frame_len + 2 * conv_padding < conv_kernel) return 0;
  return (frame_len + 2 * conv_padding - conv_kernel) / conv_stride + 1;
}

std::size_t E2ECfgConfig::token_count(std::size_t frame_len) const {
  const std::size_t conv = conv_length(frame_len);
  if (conv < pool_kernel) return 0;
  return (conv - pool_kernel) / pool_stride + 1;
}

template <typename T>
E2ECfgModel<T>::E2ECfgModel(const E2ECfgConfig& config, std::uint64_t seed) : config_(config) {
  if (config_.heads == 0 || config_.d_model % config_.heads != 0) {
    throw ConfigError("d_model must be divisible by heads");
  }
  if (config_.conv_stride == 0 || config_.pool_stride == 0 || config_.pool_kernel == 0) {
    throw ConfigError("strides and pool kernel must be positive");
  }
  dsp::Rng rng({seed, 0xE2E});
  conv_ = nn::Conv1d<T>(1, config_.d_model, config_.conv_kernel, config_.conv_stride,
                        config_.conv_padding, rng);
  bn_ = nn::BatchNorm1d<T>(config_.d_model, config_.bn_momentum, config_.bn_eps);
  positions_ = nn::PositionalEncoding<T>(config_.pos_max_len, config_.d_model);
  encoder_ = nn::TransformerEncoderLayer<T>(config_.d_model, config_.heads, config_.d_ff,
                                            config_.dropout, config_.ln_eps, rng);
  fc1_ = nn::Linear<T>(config_.d_model, config_.head_hidden, rng);
  fc2_ = nn::Linear<T>(config_.head_hidden, config_.filter_len, rng);
}

template <typename T>
void E2ECfgModel<T>::check_frame_length(std::size_t frame_len) const {
  if (frame_len < config_.min_frame_len) {
    throw ConfigError("frame length " + std::to_string(frame_len) + " below minimum " +
                      std::to_string(config_.min_frame_len));
  }
  const std::size_t tokens = config_.token_count(frame_len);
  if (tokens == 0) throw ConfigError("frame too short for the front end");
  if (tokens > config_.pos_max_len) {
    throw ConfigError("sequence exceeds positional encoding: frame length " +
                      std::to_string(frame_len) + " gives " + std::to_string(tokens) +
                      " tokens > " + std::to_string(config_.pos_max_len));
  }
}

template <typename T>
nn::Tensor<T> E2ECfgModel<T>::tokens(nn::Context<T>& ctx, const nn::Tensor<T>& frames) {
  if (frames.rank() != 2) {
    throw Error("shape mismatch in e2ecfg: frames must be (B, L), got " + nn::to_string(frames.shape()));
  }
  check_frame_length(frames.dim(1));
  nn::Tape<T>& tape = ctx.tape;
  nn::Tensor<T> x = nn::reshape(tape, frames, {frames.dim(0), 1, frames.dim(1)});
  x = conv_.forward(ctx, x);
  x = bn_.forward(ctx, x);
  x = nn::relu(tape, x);
  x = nn::max_pool1d(tape, x, config_.pool_kernel, config_.pool_stride);
  x = nn::transpose12(tape, x);
  return positions_.forward(ctx, x);
}

template <typename T>
nn::Tensor<T> E2ECfgModel<T>::generate(nn::Context<T>& ctx, const nn::Tensor<T>& frames) {
  nn::Tape<T>& tape = ctx.tape;
  nn::Tensor<T> h = encoder_.forward(ctx, tokens(ctx, frames));
  switch (config_.pooling) {
    case TokenPooling::kMean: h = nn::mean_axis(tape, h, 1); break;
    case TokenPooling::kFirst: h = nn::select_axis1(tape, h, 0); break;
    case TokenPooling::kMax: h = nn::max_axis1(tape, h); break;
  }
  h = nn::relu(tape, fc1_.forward(ctx, h));
  h = nn::dropout(tape, h, config_.dropout, ctx.training(), ctx.rng);
  return fc2_.forward(ctx, h);
}

template <typename T>
nn::ParamList<T> E2ECfgModel<T>::parameters() const {
  nn::ParamList<T> out;
  conv_.collect("front.conv", out);
  bn_.collect("front.bn", out);
  encoder_.collect("enc", out);
  fc1_.collect("head.fc1", out);
  fc2_.collect("head.fc2", out);
  return out;
}

template class E2ECfgModel<float>;
template class E2ECfgModel<double>;

}  // namespace anclab::models
