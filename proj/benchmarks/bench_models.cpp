#include <benchmark/benchmark.h>

#include "anclab/models/factory.hpp"
#include "anclab/nn/ops.hpp"
#include "anclab/training/loss.hpp"

using namespace anclab;

namespace {

nn::Tensor<float> frames(std::size_t batch) {
  nn::Tensor<float> x({batch, 13000});
  dsp::Rng rng({1, 1});
  for (float& v : x.values()) v = static_cast<float>(rng.normal());
  return x;
}

models::ModelSpec spec(models::ModelKind kind, std::size_t d_model) {
  models::ModelSpec s;
  s.kind = kind;
  s.e2ecfg.d_model = d_model;
  s.e2ecfg.heads = d_model == 256 ? 8 : 4;
  s.e2ecfg.d_ff = 4 * d_model;
  return s;
}

}  // namespace

// One frame through the generator at inference, as the co-processor runs it.
static void BM_GenerateFrame(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? models::ModelKind::kE2ECfg : models::ModelKind::kGfanc;
  auto model = models::make_generator<float>(spec(kind, static_cast<std::size_t>(state.range(1))));
  const auto x = frames(1);
  for (auto _ : state) {
    nn::Tape<float> tape;
    tape.set_recording(false);
    nn::Context<float> ctx{tape};
    benchmark::DoNotOptimize(model->generate(ctx, x));
  }
}
BENCHMARK(BM_GenerateFrame)
    ->ArgNames({"gfanc", "d_model"})
    ->Args({0, 256})
    ->Args({0, 64})
    ->Args({1, 0})
    ->Unit(benchmark::kMillisecond);

// Forward and backward of the training loss for one batch of the desk model.
static void BM_TrainStep(benchmark::State& state) {
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  auto model = models::make_generator<float>(spec(models::ModelKind::kE2ECfg, 64));
  const auto x = frames(batch);
  const auto alpha = training::LossWeights::forgetting(13000, 0.999).alpha;
  for (auto _ : state) {
    nn::Tape<float> tape;
    dsp::Rng drop({2, 2});
    nn::Context<float> ctx{tape, nn::Mode::kTrain, &drop};
    const auto w = model->generate(ctx, x);
    auto loss = nn::weighted_residual_loss(tape, nn::causal_fir(tape, w, x), x, std::span<const double>(alpha));
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);
