#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "anclab/error.hpp"
#include "anclab/nn/grad_check.hpp"
#include "anclab/nn/layers.hpp"
#include "anclab/nn/ops.hpp"
#include "anclab/nn/optim.hpp"
#include "support/oracle.hpp"

using namespace anclab;
using nn::Shape;
using TensorD = nn::Tensor<double>;

namespace {

TensorD random_tensor(Shape shape, unsigned seed, bool grad = true, double scale = 1.0) {
  auto v = oracle::random_vector(nn::numel(shape), seed, scale);
  return TensorD(std::move(shape), std::move(v), grad);
}

// Independent central differences for one element of `target`.
double central_diff(const std::function<double()>& f, TensorD target, std::size_t i, double h = 1e-5) {
  auto values = target.values();
  const double saved = values[i];
  values[i] = saved + h;
  const double up = f();
  values[i] = saved - h;
  const double down = f();
  values[i] = saved;
  return (up - down) / (2 * h);
}

TensorD weighted_sum(nn::Tape<double>& tape, const TensorD& y, unsigned seed) {
  return nn::sum(tape, nn::mul(tape, y, random_tensor(y.shape(), seed, false)));
}

}  // namespace

TEST(Shapes, ConvAndPoolLengths) {
  dsp::Rng rng({1, 1});
  nn::Conv1d<float> conv(1, 256, 64, 4, 30, rng);
  EXPECT_EQ(conv.output_length(13000), 3250u);
  nn::Tape<float> tape;
  nn::Tensor<float> x({1, 1, 3250});
  const auto pooled = nn::max_pool1d(tape, x, 4, 4);
  EXPECT_EQ(pooled.dim(2), 812u);
}

TEST(Shapes, MismatchNamesTheOp) {
  nn::Tape<double> tape;
  TensorD a({2, 3}), b({4, 5});
  const std::string msg = oracle::error_of([&] { nn::matmul(tape, a, b); });
  EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
  const std::string conv = oracle::error_of([&] { nn::conv1d(tape, TensorD({1, 2, 10}), TensorD({3, 1, 4}), TensorD({3}), 1, 0); });
  EXPECT_NE(conv.find("conv1d"), std::string::npos) << conv;
}

TEST(Softmax, RowsSumToOne) {
  nn::Tape<double> tape;
  const TensorD p = nn::softmax(tape, random_tensor({5, 9}, 1, false, 3.0));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 9; ++c) s += p.values()[r * 9 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Attention, EqualScoresAverageValues) {
  nn::Tape<double> tape;
  TensorD q({1, 4, 6}), k({1, 4, 6});
  const TensorD v = random_tensor({1, 4, 6}, 2, false);
  const TensorD out = nn::attention(tape, q, k, v, 2);
  for (std::size_t d = 0; d < 6; ++d) {
    double mean = 0;
    for (std::size_t s = 0; s < 4; ++s) mean += v.values()[s * 6 + d] / 4;
    for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(out.values()[s * 6 + d], mean, 1e-12);
  }
}

TEST(Attention, PermutationEquivariant) {
  dsp::Rng rng({3, 3});
  nn::MultiHeadSelfAttention<double> attn(8, 2, rng);
  const TensorD x = random_tensor({1, 5, 8}, 4, false);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  TensorD xp({1, 5, 8});
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t d = 0; d < 8; ++d) xp.values()[s * 8 + d] = x.values()[perm[s] * 8 + d];
  }
  nn::Tape<double> tape;
  nn::Context<double> ctx{tape};
  const TensorD y = attn.forward(ctx, x), yp = attn.forward(ctx, xp);
  for (std::size_t s = 0; s < 5; ++s) {
    for (std::size_t d = 0; d < 8; ++d) {
      EXPECT_NEAR(yp.values()[s * 8 + d], y.values()[perm[s] * 8 + d], 1e-6);
    }
  }
}

TEST(Backward, LinearSumGradientIsOuterProduct) {
  nn::Tape<double> tape;
  const TensorD x = random_tensor({1, 4}, 5, false);
  const TensorD w = random_tensor({3, 4}, 6);
  TensorD loss = nn::sum(tape, nn::linear(tape, x, w, TensorD()));
  tape.backward(loss);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(w.grad()[o * 4 + i], x.values()[i]);
  }
}

TEST(Backward, UnusedLeafGetsZeroAndNonScalarThrows) {
  nn::Tape<double> tape;
  const TensorD a = random_tensor({3}, 7), unused = random_tensor({3}, 8);
  TensorD loss = nn::sum(tape, nn::mul(tape, a, a));
  tape.backward(loss);
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
  nn::Tape<double> t2;
  TensorD vec = nn::mul(t2, a, a);
  EXPECT_EQ(oracle::error_of([&] { t2.backward(vec); }), "loss is not scalar");
}

TEST(Backward, MatchesIndependentFiniteDifferences) {
  const TensorD x = random_tensor({2, 3, 12}, 9);
  const TensorD w = random_tensor({4, 3, 5}, 10);
  const TensorD b = random_tensor({4}, 11);
  auto build = [&](nn::Tape<double>& tape) {
    TensorD y = nn::conv1d(tape, x, w, b, 2, 2);
    y = nn::sigmoid(tape, y);
    return weighted_sum(tape, nn::mean_axis(tape, y, 2), 12);
  };
  nn::Tape<double> tape;
  TensorD loss = build(tape);
  tape.backward(loss);
  auto f = [&] {
    nn::Tape<double> t;
    t.set_recording(false);
    return build(t).item();
  };
  for (const TensorD& target : {x, w, b}) {
    for (std::size_t i = 0; i < target.size(); i += 3) {
      const double num = central_diff(f, target, i);
      EXPECT_NEAR(target.grad()[i], num, 1e-8 + 1e-6 * std::abs(num));
    }
  }
}

TEST(GradCheck, LinearLayerTight) {
  dsp::Rng rng({1, 2});
  nn::Linear<double> lin(6, 4, rng);
  const TensorD x = random_tensor({3, 6}, 13);
  auto loss = [&](nn::Tape<double>& tape) {
    nn::Context<double> ctx{tape};
    return weighted_sum(tape, lin.forward(ctx, x), 14);
  };
  const auto r = nn::grad_check(loss, {{"w", lin.weight}, {"b", lin.bias}, {"x", x}}, 1e-6);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, EncoderLayer) {
  dsp::Rng rng({1, 3});
  nn::TransformerEncoderLayer<double> enc(16, 2, 32, 0.1, 1e-5, rng);
  const TensorD x = random_tensor({2, 5, 16}, 15);
  auto loss = [&](nn::Tape<double>& tape) {
    dsp::Rng drop({4, 4});
    nn::Context<double> ctx{tape, nn::Mode::kTrain, &drop};
    return weighted_sum(tape, enc.forward(ctx, x), 16);
  };
  nn::ParamList<double> params;
  enc.collect("enc", params);
  std::vector<std::pair<std::string, TensorD>> targets{{"x", x}};
  for (auto& p : params) targets.emplace_back(p.name, p.tensor);
  const auto r = nn::grad_check(loss, targets, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, BatchNormTrainAndConv) {
  nn::BatchNorm1d<double> bn(3, 0.1, 1e-5);
  const TensorD x = random_tensor({4, 3, 6}, 17);
  const TensorD gamma = random_tensor({3}, 18), beta = random_tensor({3}, 19);
  bn.weight = gamma;
  bn.bias = beta;
  auto loss = [&](nn::Tape<double>& tape) {
    nn::Context<double> ctx{tape, nn::Mode::kTrain};
    nn::BatchNorm1d<double> copy = bn;
    copy.running_mean = TensorD({3});
    copy.running_var = TensorD({3}, std::vector<double>(3, 1.0));
    return weighted_sum(tape, copy.forward(ctx, x), 20);
  };
  const auto r = nn::grad_check(loss, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, 1e-5);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Dropout, EvalModeIsIdentity) {
  const TensorD x = random_tensor({4, 8}, 21);
  nn::Tape<double> tape;
  dsp::Rng rng({1, 1});
  const TensorD y = nn::dropout(tape, x, 0.5, false, &rng);
  EXPECT_TRUE(std::equal(y.values().begin(), y.values().end(), x.values().begin()));
  TensorD loss = weighted_sum(tape, y, 22);
  tape.backward(loss);
  nn::Tape<double> t2;
  const TensorD x2(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  TensorD l2 = weighted_sum(t2, x2, 22);
  t2.backward(l2);
  EXPECT_TRUE(std::equal(x.grad().begin(), x.grad().end(), x2.grad().begin()));
}

TEST(Dropout, TrainModeScalesSurvivors) {
  const TensorD x({1000}, std::vector<double>(1000, 1.0));
  nn::Tape<double> tape;
  dsp::Rng rng({2, 2});
  const TensorD y = nn::dropout(tape, x, 0.25, true, &rng);
  std::size_t kept = 0;
  for (double v : y.values()) {
    if (v != 0.0) {
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
      ++kept;
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000, 0.75, 0.05);
}

TEST(BatchNorm, EvalModeIsPerChannelAffine) {
  nn::BatchNorm1d<double> bn(2, 0.1, 1e-5);
  bn.running_mean.values()[0] = 0.5;
  bn.running_mean.values()[1] = -1.0;
  bn.running_var.values()[0] = 4.0;
  bn.running_var.values()[1] = 0.25;
  bn.weight.values()[1] = 3.0;
  bn.bias.values()[0] = 0.1;
  const TensorD x = random_tensor({2, 2, 5}, 23, false);
  nn::Tape<double> tape;
  nn::Context<double> ctx{tape};
  const TensorD y = bn.forward(ctx, x);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t c = 0; c < 2; ++c) {
      const double a = bn.weight.values()[c] / std::sqrt(bn.running_var.values()[c] + 1e-5);
      const double off = bn.bias.values()[c] - a * bn.running_mean.values()[c];
      for (std::size_t l = 0; l < 5; ++l) {
        const std::size_t i = (b * 2 + c) * 5 + l;
        EXPECT_NEAR(y.values()[i], a * x.values()[i] + off, 1e-12);
      }
    }
  }
}

TEST(Encoder, ZeroOutputProjectionsGiveIdentity) {
  dsp::Rng rng({5, 5});
  nn::TransformerEncoderLayer<double> enc(8, 2, 16, 0.0, 1e-5, rng);
  for (auto* t : {&enc.attn.o.weight, &enc.attn.o.bias, &enc.ff.fc2.weight, &enc.ff.fc2.bias}) {
    std::fill(t->values().begin(), t->values().end(), 0.0);
  }
  const TensorD x = random_tensor({2, 3, 8}, 24, false);
  nn::Tape<double> tape;
  nn::Context<double> ctx{tape};
  const TensorD y = enc.forward(ctx, x);
  EXPECT_TRUE(std::equal(y.values().begin(), y.values().end(), x.values().begin()));
}

TEST(PositionalEncoding, TableAndBound) {
  nn::PositionalEncoding<double> pe(912, 8);
  EXPECT_DOUBLE_EQ(pe.table[1 * 8 + 0], std::sin(1.0));
  EXPECT_DOUBLE_EQ(pe.table[1 * 8 + 1], std::cos(1.0));
  EXPECT_DOUBLE_EQ(pe.table[3 * 8 + 2], std::sin(3.0 / std::pow(10000.0, 2.0 / 8)));
  nn::Tape<double> tape;
  nn::Context<double> ctx{tape};
  const std::string msg = oracle::error_of([&] { pe.forward(ctx, TensorD({1, 913, 8})); });
  EXPECT_EQ(msg.rfind("sequence exceeds positional encoding", 0), 0u) << msg;
}

TEST(ParamCounts, LinearAndEncoder) {
  dsp::Rng rng({1, 1});
  nn::ParamList<float> lin, enc;
  nn::Linear<float>(256, 512, rng).collect("l", lin);
  nn::TransformerEncoderLayer<float>(256, 8, 1024, 0.1, 1e-5, rng).collect("e", enc);
  EXPECT_EQ(nn::count_trainable(lin), 131584u);
  EXPECT_EQ(nn::count_trainable(enc), 789760u);
}

TEST(Determinism, ForwardBackwardBitIdentical) {
  auto run = [] {
    dsp::Rng rng({9, 9});
    nn::TransformerEncoderLayer<float> enc(16, 4, 32, 0.1, 1e-5, rng);
    nn::Tensor<float> x({2, 7, 16});
    dsp::Rng data({1, 0});
    for (float& v : x.values()) v = static_cast<float>(data.normal());
    nn::Tape<float> tape;
    dsp::Rng drop({3, 3});
    nn::Context<float> ctx{tape, nn::Mode::kTrain, &drop};
    nn::Tensor<float> loss = nn::sum(tape, enc.forward(ctx, x));
    tape.backward(loss);
    std::vector<float> g(enc.attn.q.weight.grad().begin(), enc.attn.q.weight.grad().end());
    g.push_back(loss.item());
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradWithoutDecayIsNoop) {
  TensorD p({3}, {1.0, -2.0, 0.5}, true);
  nn::ParamList<double> params{{"p", p, true}};
  nn::Adam<double> adam(params, {.lr = 0.1, .weight_decay = 0.0});
  adam.step();
  EXPECT_EQ(std::vector<double>(p.values().begin(), p.values().end()), (std::vector<double>{1.0, -2.0, 0.5}));
}

TEST(Adam, FirstStepWithUnitGradient) {
  TensorD p({1}, {0.0}, true);
  nn::ParamList<double> params{{"p", p, true}};
  nn::Adam<double> adam(params, {.lr = 0.1, .weight_decay = 0.0});
  p.grad()[0] = 1.0;
  adam.step();
  EXPECT_NEAR(p.values()[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(adam.step_count(), 1u);
}

TEST(Adam, CoupledDecayPullsTowardZero) {
  TensorD p({1}, {1.0}, true);
  nn::ParamList<double> params{{"p", p, true}};
  nn::Adam<double> adam(params, {.lr = 5e-4, .weight_decay = 1e-4});
  adam.step();
  EXPECT_LT(p.values()[0], 1.0);
}

TEST(Adam, NonFiniteGradientRejectedBeforeUpdate) {
  TensorD p({2}, {1.0, 2.0}, true);
  nn::ParamList<double> params{{"p", p, true}};
  nn::Adam<double> adam(params, {.lr = 0.1});
  p.grad()[0] = 1.0;
  p.grad()[1] = std::numeric_limits<double>::infinity();
  EXPECT_EQ(oracle::error_of([&] { adam.step(); }), "non-finite gradient");
  EXPECT_EQ(p.values()[0], 1.0);
}

TEST(StepLr, ScheduleValues) {
  EXPECT_DOUBLE_EQ(nn::steplr(5e-4, 5, 0.5, 0), 5e-4);
  EXPECT_DOUBLE_EQ(nn::steplr(5e-4, 5, 0.5, 4), 5e-4);
  EXPECT_DOUBLE_EQ(nn::steplr(5e-4, 5, 0.5, 5), 2.5e-4);
  EXPECT_DOUBLE_EQ(nn::steplr(1e-2, 3, 0.5, 9), 1.25e-3);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  TensorD p({2}, {0.0, 0.0}, true);
  p.grad()[0] = 3.0;
  p.grad()[1] = 4.0;
  nn::ParamList<double> params{{"p", p, true}};
  EXPECT_DOUBLE_EQ(nn::clip_grad_norm(params, 1.0), 5.0);
  EXPECT_NEAR(p.grad()[0], 0.6, 1e-12);
  EXPECT_NEAR(p.grad()[1], 0.8, 1e-12);
}
