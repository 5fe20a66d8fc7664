#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "anclab/acoustics/plant.hpp"
#include "anclab/acoustics/scene.hpp"
#include "anclab/error.hpp"
#include "anclab/models/factory.hpp"
#include "anclab/training/checkpoint.hpp"
#include "anclab/training/dataset.hpp"
#include "anclab/training/loss.hpp"
#include "anclab/training/model_io.hpp"
#include "anclab/training/trainer.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using training::Split;

namespace {

training::DatasetSpec small_spec() {
  training::DatasetSpec s;
  s.n_train = 6;
  s.n_val = 2;
  s.n_test = 2;
  s.duration_s = 0.1;
  return s;
}

models::ModelSpec tiny_model() {
  models::ModelSpec m;
  m.e2ecfg.d_model = 8;
  m.e2ecfg.heads = 2;
  m.e2ecfg.d_ff = 16;
  m.e2ecfg.head_hidden = 16;
  m.e2ecfg.filter_len = 32;
  m.seed = 11;
  return m;
}

training::TrainConfig tiny_train() {
  training::TrainConfig c;
  c.lr0 = 1e-3;
  c.batch_size = 4;
  c.epochs = 2;
  c.seed = 3;
  return c;
}

acoustics::AcousticScene scene() { return acoustics::synthesize_scene({}, {2024, 0x5C}); }

std::vector<float> trainable_values(const models::FilterGenerator<float>& m) {
  std::vector<float> out;
  for (const auto& p : m.parameters()) {
    if (p.trainable) out.insert(out.end(), p.tensor.values().begin(), p.tensor.values().end());
  }
  return out;
}

}  // namespace

TEST(Dataset, SplitCountsAndDeterminism) {
  const auto a = training::generate_dataset(small_spec());
  const auto b = training::generate_dataset(small_spec());
  EXPECT_EQ(a.split(Split::kTrain).size(), 6u);
  EXPECT_EQ(a.split(Split::kVal).size(), 2u);
  EXPECT_EQ(a.split(Split::kTest).size(), 2u);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples()[i].low_hz, b.samples()[i].low_hz);
    EXPECT_EQ(a.samples()[i].high_hz, b.samples()[i].high_hz);
    EXPECT_EQ(a.synthesize(a.samples()[i]).vector(), b.synthesize(b.samples()[i]).vector());
  }
}

TEST(Dataset, SplitsUseDisjointStreams) {
  training::DatasetSpec s = small_spec();
  s.n_train = 200;
  s.n_val = 50;
  s.n_test = 50;
  std::set<std::uint64_t> streams;
  const auto ds = training::generate_dataset(s);
  for (const auto& info : ds.samples()) streams.insert(info.stream_id);
  EXPECT_EQ(streams.size(), 300u);
  EXPECT_NE(training::sample_stream(Split::kTrain, 0), training::sample_stream(Split::kVal, 0));
}

TEST(Dataset, BandsRespectRangeAndMinimumWidth) {
  training::DatasetSpec s = small_spec();
  s.n_train = 2000;
  const auto ds = training::generate_dataset(s);
  for (const auto& info : ds.samples()) {
    EXPECT_GE(info.low_hz, s.band_low_hz);
    EXPECT_LE(info.high_hz, s.band_high_hz);
    EXPECT_GE(info.high_hz - info.low_hz, s.min_bandwidth_hz);
  }
}

TEST(Dataset, SamplePowerLiesInItsBand) {
  training::DatasetSpec s = small_spec();
  s.n_train = 100;
  s.duration_s = 1.0;
  const auto ds = training::generate_dataset(s);
  for (const auto& info : ds.split(Split::kTrain)) {
    const dsp::Signal x = ds.synthesize(info);
    EXPECT_GE(oracle::band_power_fraction(x.samples(), s.sample_rate_hz, info.low_hz, info.high_hz), 0.95)
        << info.low_hz << "-" << info.high_hz;
  }
}

TEST(Dataset, ManifestRoundTrip) {
  const auto a = training::generate_dataset(small_spec());
  const auto b = training::dataset_from_manifest(training::manifest(a));
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.synthesize(a.samples()[3]).vector(), b.synthesize(b.samples()[3]).vector());
}

TEST(Dataset, RejectsImpossibleBand) {
  training::DatasetSpec s = small_spec();
  s.band_low_hz = 1850;
  EXPECT_EQ(oracle::error_of([&] { training::generate_dataset(s); }).rfind("invalid band", 0), 0u);
}

TEST(Loss, ClosedFormValues) {
  const std::vector<double> ones(4, 1.0);
  EXPECT_DOUBLE_EQ(training::loss_frame(ones), 1.0);
  const auto w = training::LossWeights::forgetting(4, 0.5);
  EXPECT_EQ(w.alpha, (std::vector<double>{0.125, 0.25, 0.5, 1.0}));
  EXPECT_DOUBLE_EQ(training::loss_frame(ones, w), 1.875 / 4);
  const std::vector<double> e{1.0, -2.0, 0.0, 3.0};
  EXPECT_DOUBLE_EQ(training::loss_frame(e, training::LossWeights::uniform(4)), 14.0 / 4);
  const auto big = training::LossWeights::forgetting(13000, 0.999);
  EXPECT_DOUBLE_EQ(big.alpha.back(), 1.0);
  EXPECT_NEAR(big.alpha.front(), std::pow(0.999, 12999), 1e-18);
  EXPECT_EQ(oracle::error_of([] { training::LossWeights::forgetting(4, 1.5); }),
            "forgetting factor must be in (0, 1]");
}

TEST(Loss, FilterGradientMatchesFiniteDifferences) {
  const std::size_t T = 300, L = 8;
  const auto x = oracle::random_vector(T, 21);
  const auto d = oracle::random_vector(T, 22);
  const auto w = training::LossWeights::forgetting(T, 0.99);
  std::vector<double> h = oracle::random_vector(L, 23, 0.3);
  auto loss = [&](const std::vector<double>& taps) {
    const auto y = oracle::naive_convolve(x, taps);
    std::vector<double> e(T);
    for (std::size_t n = 0; n < T; ++n) e[n] = d[n] - y[n];
    return training::loss_frame(e, w);
  };
  const auto y = oracle::naive_convolve(x, h);
  std::vector<double> e(T);
  for (std::size_t n = 0; n < T; ++n) e[n] = d[n] - y[n];
  const auto g = training::filter_grad_oracle(e, x, w, L);
  for (std::size_t k = 0; k < L; ++k) {
    auto up = h, down = h;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    EXPECT_NEAR(g[k], (loss(up) - loss(down)) / 2e-6, 1e-7);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto model = models::make_generator<float>(tiny_model());
  training::Checkpoint ck = training::model_checkpoint(*model, tiny_model(), {{"epoch", 4}});
  ck.optimizer = training::OptimizerBlock{7, {{"a", {1.5f, -2.0f}, {0.25f, 3.0f}}}};
  oracle::TempDir dir;
  training::save_checkpoint(ck, dir.path() / "m.ancl");
  const auto back = training::load_checkpoint(dir.path() / "m.ancl");
  ASSERT_EQ(back.tensors.size(), ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ck.tensors[i].name);
    EXPECT_EQ(back.tensors[i].shape, ck.tensors[i].shape);
    EXPECT_EQ(back.tensors[i].values, ck.tensors[i].values);
  }
  EXPECT_EQ(back.metadata, ck.metadata);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_EQ(back.optimizer->step, 7u);
  EXPECT_EQ(back.optimizer->entries[0].v, (std::vector<float>{0.25f, 3.0f}));

  auto reloaded = training::load_generator(dir.path() / "m.ancl");
  nn::Tensor<float> x({1, 1300});
  dsp::Rng rng({1, 1});
  for (float& v : x.values()) v = static_cast<float>(rng.normal());
  auto run = [&](models::FilterGenerator<float>& m) {
    nn::Tape<float> tape;
    nn::Context<float> ctx{tape};
    const auto w = m.generate(ctx, x);
    return std::vector<float>(w.values().begin(), w.values().end());
  };
  EXPECT_EQ(run(*model), run(*reloaded));
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  auto model = models::make_generator<float>(tiny_model());
  const std::string bytes = training::serialize_checkpoint(training::model_checkpoint(*model, tiny_model()));
  EXPECT_EQ(oracle::error_of([&] { training::parse_checkpoint(bytes.substr(0, bytes.size() / 2)); })
                .rfind("truncated checkpoint", 0),
            0u);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(oracle::error_of([&] { training::parse_checkpoint(bad); }), "incompatible checkpoint: bad magic");
  EXPECT_EQ(oracle::error_of([&] { training::parse_checkpoint(bytes + "x"); }),
            "incompatible checkpoint: trailing bytes");
}

TEST(Checkpoint, MismatchedArchitectureIsNamed) {
  auto model = models::make_generator<float>(tiny_model());
  const auto ck = training::model_checkpoint(*model, tiny_model());
  models::ModelSpec other = tiny_model();
  other.e2ecfg.filter_len = 16;
  auto target = models::make_generator<float>(other);
  const std::string msg = oracle::error_of([&] { training::import_tensors(ck.tensors, target->parameters()); });
  EXPECT_EQ(msg.rfind("checkpoint does not match the model:", 0), 0u) << msg;
  EXPECT_NE(msg.find("head.fc2"), std::string::npos) << msg;
}

TEST(Checkpoint, SceneRoundTrip) {
  acoustics::SceneConfig c;
  c.estimate_error = 0.05;
  const auto s = acoustics::synthesize_scene(c, {5, 0x5C});
  const auto back = training::scene_from_checkpoint(
      training::parse_checkpoint(training::serialize_checkpoint(training::scene_checkpoint(s, c))));
  EXPECT_EQ(back.primary().vector(), s.primary().vector());
  EXPECT_EQ(back.secondary().vector(), s.secondary().vector());
  EXPECT_EQ(back.secondary_estimate().vector(), s.secondary_estimate().vector());
  EXPECT_EQ(back.sample_rate_hz(), s.sample_rate_hz());
}

TEST(Trainer, ZeroEpochsLeavesInitialWeights) {
  auto model = models::make_generator<float>(tiny_model());
  const auto before = trainable_values(*model);
  auto cfg = tiny_train();
  cfg.epochs = 0;
  const auto r = training::train(*model, cfg, training::generate_dataset(small_spec()), scene());
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(trainable_values(*model), before);
}

TEST(Trainer, ZeroLearningRateLeavesTrainableWeights) {
  auto model = models::make_generator<float>(tiny_model());
  const auto before = trainable_values(*model);
  auto cfg = tiny_train();
  cfg.lr0 = 0.0;
  const auto r = training::train(*model, cfg, training::generate_dataset(small_spec()), scene());
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(trainable_values(*model), before);
}

TEST(Trainer, RunsAreBitIdentical) {
  const auto ds = training::generate_dataset(small_spec());
  auto run = [&] {
    auto model = models::make_generator<float>(tiny_model());
    const auto r = training::train(*model, tiny_train(), ds, scene());
    std::vector<double> out = r.batch_losses;
    for (const auto& h : r.history) out.push_back(h.val_loss);
    for (float v : trainable_values(*model)) out.push_back(v);
    return out;
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]) << "index " << i;
}

TEST(Trainer, HistoryFollowsScheduleAndCsv) {
  auto model = models::make_generator<float>(tiny_model());
  auto cfg = tiny_train();
  cfg.epochs = 3;
  cfg.scheduler_step = 2;
  const auto r = training::train(*model, cfg, training::generate_dataset(small_spec()), scene());
  ASSERT_EQ(r.history.size(), 3u);
  EXPECT_DOUBLE_EQ(r.history[0].lr, 1e-3);
  EXPECT_DOUBLE_EQ(r.history[1].lr, 1e-3);
  EXPECT_DOUBLE_EQ(r.history[2].lr, 5e-4);
  EXPECT_EQ(r.batch_losses.size(), 6u);
  EXPECT_GE(r.best_epoch, 1u);
  std::ostringstream csv;
  training::write_history_csv(csv, r.history);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epoch,lr,train_loss,val_loss");
}

TEST(Trainer, RejectsBadConfiguration) {
  auto model = models::make_generator<float>(tiny_model());
  auto cfg = tiny_train();
  cfg.batch_size = 0;
  EXPECT_EQ(oracle::error_of([&] { training::train(*model, cfg, training::generate_dataset(small_spec()), scene()); }),
            "invalid training configuration");
}
