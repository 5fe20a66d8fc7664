#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "anclab/acoustics/scene.hpp"
#include "anclab/models/generator.hpp"
#include "anclab/training/checkpoint.hpp"
#include "anclab/training/dataset.hpp"
#include "anclab/training/loss.hpp"

namespace anclab::training {

struct TrainConfig {
  double lr0 = 5e-4;
  double weight_decay = 1e-4;
  bool decoupled_weight_decay = false;
  std::size_t batch_size = 128;
  std::size_t epochs = 40;
  std::size_t scheduler_step = 5;
  double scheduler_gamma = 0.5;
  LossMode loss_mode = LossMode::kWeighted;
  double lambda = 0.999;
  bool reverse_weights = false;
  // Global gradient-norm clip; 0 disables.
  double clip_grad_norm = 0.0;
  // Validation subset size; 0 uses the whole split.
  std::size_t max_val_samples = 0;
  // Keep synthesized frames in memory when they fit in this many bytes.
  std::size_t cache_limit_bytes = std::size_t{1} << 30;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::vector<double> batch_losses;
  // 0 when no epoch ran; otherwise 1-based epoch of the kept parameters.
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  OptimizerBlock optimizer;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Unsupervised end-to-end training. Per batch: x' = x * S_hat plus sensor
// noise at the dataset SNR, w = model(x), y = w * x', loss on d - y, Adam step.
// The model is left holding the parameters of the best validation epoch.
// Throws on a non-finite loss, naming the epoch and batch.
TrainResult train(models::FilterGenerator<float>& model, const TrainConfig& config,
                  const Dataset& dataset, const acoustics::AcousticScene& scene,
                  const EpochCallback& on_epoch = {});

// Mean loss of `model` in eval mode on `samples` without sensor noise.
double evaluate_loss(models::FilterGenerator<float>& model, const TrainConfig& config,
                     const Dataset& dataset, const std::vector<SampleInfo>& samples,
                     const acoustics::AcousticScene& scene);

}  // namespace anclab::training
