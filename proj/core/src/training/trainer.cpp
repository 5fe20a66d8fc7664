#include "anclab/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"
#include "anclab/nn/optim.hpp"
#include "anclab/parallel.hpp"

namespace anclab::training {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5F;
constexpr std::uint64_t kDropoutStream = 0xD0;
constexpr std::uint64_t kSensorChild = 0x5E5;

struct Frame {
  std::vector<double> x;
  std::vector<double> d;
  std::vector<double> xf;
};

class FrameSource {
 public:
  FrameSource(const Dataset& dataset, const acoustics::AcousticScene& scene, std::size_t cache_limit)
      : dataset_(dataset), scene_(scene) {
    const std::size_t bytes = dataset.size() * dataset.spec().frame_length() * 3 * sizeof(double);
    if (bytes <= cache_limit) cache_.resize(dataset.size());
  }

  Frame get(const SampleInfo& s) {
    if (cache_.empty()) return make(s);
    std::optional<Frame>& slot = cache_[slot_index(s)];
    if (!slot) slot = make(s);
    return *slot;
  }

 private:
  std::size_t slot_index(const SampleInfo& s) const {
    const auto& spec = dataset_.spec();
    switch (s.split) {
      case Split::kTrain: return s.index;
      case Split::kVal: return spec.n_train + s.index;
      case Split::kTest: return spec.n_train + spec.n_val + s.index;
    }
    return 0;
  }

  Frame make(const SampleInfo& s) const {
    const dsp::Signal x = dataset_.synthesize(s);
    Frame f;
    f.x = x.vector();
    f.d = dsp::convolve(x, scene_.primary()).vector();
    f.xf = dsp::convolve(x, scene_.secondary_estimate()).vector();
    return f;
  }

  const Dataset& dataset_;
  const acoustics::AcousticScene& scene_;
  std::vector<std::optional<Frame>> cache_;
};

struct Batch {
  nn::Tensor<float> frames;
  nn::Tensor<float> filtered;
  nn::Tensor<float> disturbance;
};

// Sensor noise uses a stream keyed by (seed, sample stream, epoch); pass
// no epoch for clean validation frames.
Batch make_batch(FrameSource& source, const std::vector<SampleInfo>& samples, std::size_t begin,
                 std::size_t end, std::size_t length, const TrainConfig& config, double snr_db,
                 std::optional<std::size_t> epoch) {
  const std::size_t b = end - begin;
  Batch batch{nn::Tensor<float>({b, length}), nn::Tensor<float>({b, length}),
              nn::Tensor<float>({b, length})};
  std::vector<Frame> frames(b);
  // The cache is filled serially so parallel workers never race on a slot.
  for (std::size_t i = 0; i < b; ++i) frames[i] = source.get(samples[begin + i]);
  parallel_for(b, [&](std::size_t i) {
    const SampleInfo& s = samples[begin + i];
    Frame& f = frames[i];
    std::vector<double> xf = f.xf;
    if (epoch && std::isfinite(snr_db)) {
      const dsp::RngSpec stream = dsp::derive({config.seed, s.stream_id}, kSensorChild + *epoch);
      xf = dsp::mix_at_snr(dsp::Signal(std::move(xf), 1.0), stream, snr_db).vector();
    }
    float* fx = batch.frames.data() + i * length;
    float* ff = batch.filtered.data() + i * length;
    float* fd = batch.disturbance.data() + i * length;
    for (std::size_t n = 0; n < length; ++n) {
      fx[n] = static_cast<float>(f.x[n]);
      ff[n] = static_cast<float>(xf[n]);
      fd[n] = static_cast<float>(f.d[n]);
    }
  });
  return batch;
}

double batch_loss(models::FilterGenerator<float>& model, nn::Context<float>& ctx, const Batch& batch,
                  const LossWeights& weights, nn::Tensor<float>* loss_out) {
  nn::Tape<float>& tape = ctx.tape;
  const nn::Tensor<float> w = model.generate(ctx, batch.frames);
  const nn::Tensor<float> y = nn::causal_fir(tape, w, batch.filtered);
  nn::Tensor<float> loss = nn::weighted_residual_loss(tape, y, batch.disturbance, weights.alpha);
  if (loss_out != nullptr) *loss_out = loss;
  return static_cast<double>(loss.item());
}

double mean_loss(models::FilterGenerator<float>& model, const TrainConfig& config,
                 FrameSource& source, const std::vector<SampleInfo>& samples, std::size_t length,
                 const LossWeights& weights) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  const std::size_t bs = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t begin = 0; begin < samples.size(); begin += bs) {
    const std::size_t end = std::min(samples.size(), begin + bs);
    const Batch batch = make_batch(source, samples, begin, end, length, config, 0.0, std::nullopt);
    nn::Tape<float> tape;
    nn::NoGradGuard guard(tape);
    nn::Context<float> ctx{tape, nn::Mode::kEval, nullptr};
    total += batch_loss(model, ctx, batch, weights, nullptr) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(samples.size());
}

void check_config(const TrainConfig& c) {
  if (!(c.lr0 >= 0.0) || c.batch_size == 0 || c.scheduler_step == 0 ||
      !(c.scheduler_gamma > 0.0 && c.scheduler_gamma <= 1.0) || !(c.weight_decay >= 0.0) ||
      !(c.clip_grad_norm >= 0.0)) {
    throw ConfigError("invalid training configuration");
  }
}

std::vector<SampleInfo> validation_set(const Dataset& dataset, const TrainConfig& config) {
  std::vector<SampleInfo> val = dataset.split(Split::kVal);
  if (config.max_val_samples != 0 && val.size() > config.max_val_samples) {
    val.resize(config.max_val_samples);
  }
  return val;
}

}  // namespace

double evaluate_loss(models::FilterGenerator<float>& model, const TrainConfig& config,
                     const Dataset& dataset, const std::vector<SampleInfo>& samples,
                     const acoustics::AcousticScene& scene) {
  check_config(config);
  const std::size_t length = dataset.spec().frame_length();
  model.check_frame_length(length);
  FrameSource source(dataset, scene, 0);
  const LossWeights weights =
      make_loss_weights(config.loss_mode, length, config.lambda, config.reverse_weights);
  return mean_loss(model, config, source, samples, length, weights);
}

TrainResult train(models::FilterGenerator<float>& model, const TrainConfig& config,
                  const Dataset& dataset, const acoustics::AcousticScene& scene,
                  const EpochCallback& on_epoch) {
  check_config(config);
  if (dataset.spec().sample_rate_hz != scene.sample_rate_hz()) {
    throw ConfigError("dataset and scene sample rates differ");
  }
  const std::size_t length = dataset.spec().frame_length();
  model.check_frame_length(length);

  const nn::ParamList<float> params = model.parameters();
  nn::AdamOptions adam_options;
  adam_options.lr = config.lr0;
  adam_options.weight_decay = config.weight_decay;
  adam_options.decoupled_weight_decay = config.decoupled_weight_decay;
  nn::Adam<float> adam(params, adam_options);

  TrainResult result;
  if (config.epochs == 0) {
    result.optimizer = export_optimizer(adam);
    return result;
  }

  FrameSource source(dataset, scene, config.cache_limit_bytes);
  const LossWeights weights =
      make_loss_weights(config.loss_mode, length, config.lambda, config.reverse_weights);
  std::vector<SampleInfo> train_set = dataset.split(Split::kTrain);
  const std::vector<SampleInfo> val_set = validation_set(dataset, config);
  const double snr_db = dataset.spec().snr_db;

  std::vector<TensorRecord> best_params;
  OptimizerBlock best_optimizer;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = nn::steplr(config.lr0, config.scheduler_step, config.scheduler_gamma, epoch);
    adam.set_lr(lr);

    dsp::Rng shuffle(dsp::derive({config.seed, kShuffleStream}, epoch));
    for (std::size_t i = train_set.size(); i > 1; --i) {
      std::swap(train_set[i - 1], train_set[shuffle.below(i)]);
    }

    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < train_set.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(train_set.size(), begin + config.batch_size);
      const Batch batch = make_batch(source, train_set, begin, end, length, config, snr_db, epoch);

      dsp::Rng dropout_rng(dsp::derive(dsp::derive({config.seed, kDropoutStream}, epoch), batch_index));
      nn::Tape<float> tape;
      nn::Context<float> ctx{tape, nn::Mode::kTrain, &dropout_rng};
      adam.zero_grad();
      nn::Tensor<float> loss;
      const double value = batch_loss(model, ctx, batch, weights, &loss);
      if (!std::isfinite(value)) {
        throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(batch_index + 1));
      }
      tape.backward(loss);
      if (config.clip_grad_norm > 0.0) nn::clip_grad_norm(params, config.clip_grad_norm);
      adam.step();
      result.batch_losses.push_back(value);
      epoch_total += value * static_cast<double>(end - begin);
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.lr = lr;
    record.train_loss = epoch_total / static_cast<double>(std::max<std::size_t>(1, train_set.size()));
    record.val_loss = mean_loss(model, config, source, val_set, length, weights);
    result.history.push_back(record);
    if (result.best_epoch == 0 || record.val_loss < result.best_val_loss) {
      result.best_epoch = record.epoch;
      result.best_val_loss = record.val_loss;
      best_params = export_tensors(params);
      best_optimizer = export_optimizer(adam);
    }
    if (on_epoch) on_epoch(record);
  }
  import_tensors(best_params, params);
  result.optimizer = std::move(best_optimizer);
  return result;
}

}  // namespace anclab::training
