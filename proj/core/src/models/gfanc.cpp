#include "anclab/models/gfanc.hpp"

#include <algorithm>

#include "anclab/error.hpp"

namespace anclab::models {

std::size_t GfancConfig::conv_length(std::size_t frame_len) const {
  if (frame_len + 2 * conv_padding < conv_kernel) return 0;
  return (frame_len + 2 * conv_padding - conv_kernel) / conv_stride + 1;
}

std::size_t GfancConfig::pooled_length(std::size_t frame_len) const {
  const std::size_t conv = conv_length(frame_len);
  if (conv < pool_kernel) return 0;
  return (conv - pool_kernel) / pool_stride + 1;
}

template <typename T>
ResidualBlock<T>::ResidualBlock(std::size_t channels, std::size_t kernel, double momentum,
                                double eps, dsp::Rng& rng)
    : conv1(channels, channels, kernel, 1, kernel / 2, rng),
      conv2(channels, channels, kernel, 1, kernel / 2, rng),
      bn1(channels, momentum, eps),
      bn2(channels, momentum, eps) {}

template <typename T>
nn::Tensor<T> ResidualBlock<T>::forward(nn::Context<T>& ctx, const nn::Tensor<T>& x) {
  nn::Tensor<T> h = nn::relu(ctx.tape, bn1.forward(ctx, conv1.forward(ctx, x)));
  h = bn2.forward(ctx, conv2.forward(ctx, h));
  return nn::relu(ctx.tape, nn::add(ctx.tape, h, x));
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix, nn::ParamList<T>& out) const {
  conv1.collect(prefix + ".conv1", out);
  bn1.collect(prefix + ".bn1", out);
  conv2.collect(prefix + ".conv2", out);
  bn2.collect(prefix + ".bn2", out);
}

template <typename T>
GfancModel<T>::GfancModel(const GfancConfig& config, std::uint64_t seed) : config_(config) {
  if (config_.block_kernel % 2 == 0) throw ConfigError("residual kernel must be odd");
  if (config_.subfilters < 1 || config_.subfilters > kMaxSubFilters) {
    throw ConfigError("sub-filter count outside [1, 256]");
  }
  if (config_.conv_stride == 0 || config_.pool_stride == 0 || config_.pool_kernel == 0) {
    throw ConfigError("strides and pool kernel must be positive");
  }
  dsp::Rng rng({seed, 0x6FA});
  conv_ = nn::Conv1d<T>(1, config_.channels, config_.conv_kernel, config_.conv_stride,
                        config_.conv_padding, rng);
  bn_ = nn::BatchNorm1d<T>(config_.channels, config_.bn_momentum, config_.bn_eps);
  for (std::size_t b = 0; b < config_.blocks; ++b) {
    blocks_.emplace_back(config_.channels, config_.block_kernel, config_.bn_momentum,
                         config_.bn_eps, rng);
  }
  fc_ = nn::Linear<T>(config_.channels, config_.subfilters, rng);
  for (std::size_t i = 0; i < config_.subfilters; ++i) {
    subs_.emplace_back(nn::Shape{config_.filter_len});
  }
  source_ = nn::Tensor<T>({config_.filter_len});
}

template <typename T>
void GfancModel<T>::check_frame_length(std::size_t frame_len) const {
  if (frame_len == 0) throw ConfigError("empty frame");
  if (config_.pooled_length(frame_len) == 0) {
    throw ConfigError("frame length " + std::to_string(frame_len) + " too short for the front end");
  }
}

template <typename T>
nn::Tensor<T> GfancModel<T>::weights(nn::Context<T>& ctx, const nn::Tensor<T>& frames) {
  if (frames.rank() != 2) {
    throw Error("shape mismatch in gfanc: frames must be (B, L), got " + nn::to_string(frames.shape()));
  }
  check_frame_length(frames.dim(1));
  nn::Tape<T>& tape = ctx.tape;
  nn::Tensor<T> x = nn::reshape(tape, frames, {frames.dim(0), 1, frames.dim(1)});
  x = nn::relu(tape, bn_.forward(ctx, conv_.forward(ctx, x)));
  x = nn::max_pool1d(tape, x, config_.pool_kernel, config_.pool_stride);
  for (auto& block : blocks_) x = block.forward(ctx, x);
  x = nn::mean_axis(tape, x, 2);
  return nn::sigmoid(tape, fc_.forward(ctx, x));
}

template <typename T>
nn::Tensor<T> GfancModel<T>::generate(nn::Context<T>& ctx, const nn::Tensor<T>& frames) {
  const std::size_t n = config_.filter_len;
  nn::Tensor<T> bank({subs_.size(), n});
  auto rows = bank.values();
  for (std::size_t i = 0; i < subs_.size(); ++i) {
    std::copy(subs_[i].values().begin(), subs_[i].values().end(), rows.begin() + i * n);
  }
  return nn::matmul(ctx.tape, weights(ctx, frames), bank);
}

template <typename T>
nn::ParamList<T> GfancModel<T>::parameters() const {
  nn::ParamList<T> out;
  conv_.collect("front.conv", out);
  bn_.collect("front.bn", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect("blocks." + std::to_string(b), out);
  }
  fc_.collect("fc", out);
  for (std::size_t i = 0; i < subs_.size(); ++i) {
    out.push_back({"bank.sub." + std::to_string(i), subs_[i], false});
  }
  out.push_back({"bank.source", source_, false});
  return out;
}

template <typename T>
void GfancModel<T>::set_bank(const SubFilterBank& bank) {
  if (bank.size() != config_.subfilters) {
    throw Error("sub-filter bank has " + std::to_string(bank.size()) + " filters, model expects " +
                std::to_string(config_.subfilters));
  }
  if (bank.filter_length() != config_.filter_len) {
    throw Error("sub-filter length " + std::to_string(bank.filter_length()) + " != " +
                std::to_string(config_.filter_len));
  }
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto taps = bank.sub_filters[i].taps();
    if (taps.size() != config_.filter_len) throw Error("sub-filter length mismatch");
    auto row = subs_[i].values();
    for (std::size_t k = 0; k < taps.size(); ++k) row[k] = static_cast<T>(taps[k]);
  }
  auto src = source_.values();
  for (std::size_t k = 0; k < src.size(); ++k) src[k] = static_cast<T>(bank.source[k]);
}

template <typename T>
SubFilterBank GfancModel<T>::bank() const {
  SubFilterBank out;
  for (const auto& sub : subs_) {
    out.sub_filters.emplace_back(std::vector<double>(sub.values().begin(), sub.values().end()));
  }
  const auto src = source_.values();
  out.source = dsp::FirFilter(std::vector<double>(src.begin(), src.end()));
  return out;
}

dsp::FirFilter gfanc_forward(GfancModel<double>& model, const SubFilterBank& bank,
                             const dsp::Signal& frame) {
  if (bank.size() != model.config().subfilters) {
    throw Error("sub-filter bank has " + std::to_string(bank.size()) + " filters, model expects " +
                std::to_string(model.config().subfilters));
  }
  if (frame.empty()) throw Error("empty frame");
  nn::Tape<double> tape;
  nn::NoGradGuard guard(tape);
  nn::Context<double> ctx{tape, nn::Mode::kEval, nullptr};
  const nn::Tensor<double> frames({1, frame.size()}, frame.vector());
  const nn::Tensor<double> g = model.weights(ctx, frames);
  return combine(bank, g.values());
}

template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template class GfancModel<float>;
template class GfancModel<double>;

}  // namespace anclab::models
