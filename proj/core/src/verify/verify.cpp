#include "anclab/verify/verify.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <utility>

#include <fmt/format.h>

#include "anclab/acoustics/plant.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/dsp/noise.hpp"
#include "anclab/eval/harness.hpp"
#include "anclab/eval/wav.hpp"
#include "anclab/models/e2ecfg.hpp"
#include "anclab/models/flops.hpp"
#include "anclab/models/gfanc.hpp"
#include "anclab/nn/grad_check.hpp"
#include "anclab/nn/ops.hpp"
#include "anclab/training/checkpoint.hpp"
#include "anclab/training/loss.hpp"

namespace anclab::verify {
namespace {

using Outcome = std::pair<bool, std::string>;
using TensorD = nn::Tensor<double>;
using Targets = std::vector<std::pair<std::string, TensorD>>;

constexpr double kKinkTol = 1e-4;
constexpr double kSmoothTol = 1e-5;

TensorD random_tensor(nn::Shape shape, dsp::Rng& rng, bool grad = true, double scale = 1.0) {
  TensorD t(std::move(shape), grad);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

// Projects onto a fixed random direction so every output element matters.
TensorD project(nn::Tape<double>& tape, const TensorD& y, std::uint64_t seed) {
  dsp::Rng rng({seed, 0xF00});
  TensorD r = random_tensor(y.shape(), rng, false);
  return nn::sum(tape, nn::mul(tape, y, r));
}

Outcome grad_outcome(const nn::GradCheckReport& report) {
  std::string worst;
  double worst_err = -1.0;
  for (const auto& e : report.entries) {
    if (e.max_rel_error > worst_err) {
      worst_err = e.max_rel_error;
      worst = e.name;
    }
  }
  return {report.passed, fmt::format("max rel err {:.2e} ({}) tol {:.0e}", report.max_rel_error,
                                     worst, report.tolerance)};
}

Outcome check_op(const std::function<TensorD(nn::Tape<double>&, const std::vector<TensorD>&)>& op,
                 std::vector<std::pair<std::string, nn::Shape>> inputs, double tol,
                 double min_abs = 0.0) {
  dsp::Rng rng({17, inputs.size()});
  Targets targets;
  std::vector<TensorD> tensors;
  for (auto& [name, shape] : inputs) {
    TensorD t = random_tensor(shape, rng);
    // Keep kinked ops away from their kinks.
    if (min_abs > 0.0) {
      for (double& v : t.values()) v = std::copysign(std::abs(v) + min_abs, v);
    }
    tensors.push_back(t);
    targets.emplace_back(name, t);
  }
  auto loss = [&](nn::Tape<double>& tape) { return project(tape, op(tape, tensors), 99); };
  return grad_outcome(nn::grad_check(loss, targets, tol));
}

Outcome layer_grads() {
  std::vector<std::string> failed;
  double worst = 0.0;
  auto run = [&](const std::string& name, const Outcome& o) {
    if (!o.first) failed.push_back(name + ": " + o.second);
    const auto pos = o.second.find("err ");
    worst = std::max(worst, std::stod(o.second.substr(pos + 4)));
  };
  using V = std::vector<TensorD>;
  run("linear", check_op([](auto& t, const V& v) { return nn::linear(t, v[0], v[1], v[2]); },
                         {{"x", {3, 5}}, {"w", {4, 5}}, {"b", {4}}}, kSmoothTol));
  run("matmul", check_op([](auto& t, const V& v) { return nn::matmul(t, v[0], v[1]); },
                         {{"a", {3, 4}}, {"b", {4, 5}}}, kSmoothTol));
  run("conv1d", check_op([](auto& t, const V& v) { return nn::conv1d(t, v[0], v[1], v[2], 2, 1); },
                         {{"x", {2, 2, 11}}, {"w", {3, 2, 4}}, {"b", {3}}}, kSmoothTol));
  run("batch_norm1d", check_op(
                          [](auto& t, const V& v) {
                            TensorD mean({3}), var({3}, std::vector<double>(3, 1.0));
                            return nn::batch_norm1d(t, v[0], v[1], v[2], mean, var, true, 0.1, 1e-5);
                          },
                          {{"x", {4, 3, 5}}, {"gamma", {3}}, {"beta", {3}}}, kSmoothTol));
  run("layer_norm", check_op([](auto& t, const V& v) { return nn::layer_norm(t, v[0], v[1], v[2], 1e-5); },
                             {{"x", {2, 3, 6}}, {"gamma", {6}}, {"beta", {6}}}, kSmoothTol));
  run("softmax", check_op([](auto& t, const V& v) { return nn::softmax(t, v[0]); }, {{"x", {3, 7}}},
                          kSmoothTol));
  run("attention", check_op([](auto& t, const V& v) { return nn::attention(t, v[0], v[1], v[2], 2); },
                            {{"q", {2, 5, 4}}, {"k", {2, 5, 4}}, {"v", {2, 5, 4}}}, kSmoothTol));
  run("sigmoid", check_op([](auto& t, const V& v) { return nn::sigmoid(t, v[0]); }, {{"x", {4, 6}}},
                          kSmoothTol));
  run("relu", check_op([](auto& t, const V& v) { return nn::relu(t, v[0]); }, {{"x", {4, 6}}},
                       kKinkTol, 0.05));
  run("max_pool1d", check_op([](auto& t, const V& v) { return nn::max_pool1d(t, v[0], 3, 2); },
                             {{"x", {2, 2, 11}}}, kKinkTol));
  run("mean_axis", check_op([](auto& t, const V& v) { return nn::mean_axis(t, v[0], 1); },
                            {{"x", {2, 3, 4}}}, kSmoothTol));
  run("max_axis1", check_op([](auto& t, const V& v) { return nn::max_axis1(t, v[0]); },
                            {{"x", {2, 5, 3}}}, kKinkTol));
  run("transpose12", check_op([](auto& t, const V& v) { return nn::transpose12(t, v[0]); },
                              {{"x", {2, 3, 4}}}, kSmoothTol));
  run("dropout", check_op(
                     [](auto& t, const V& v) {
                       dsp::Rng rng({3, 3});
                       return nn::dropout(t, v[0], 0.3, true, &rng);
                     },
                     {{"x", {4, 8}}}, kSmoothTol));
  run("causal_fir", check_op([](auto& t, const V& v) { return nn::causal_fir(t, v[0], v[1]); },
                             {{"w", {2, 5}}, {"x", {2, 12}}}, kSmoothTol));
  run("weighted_residual_loss",
      check_op(
          [](auto& t, const V& v) {
            const auto alpha = training::LossWeights::forgetting(9, 0.9).alpha;
            return nn::weighted_residual_loss(t, v[0], v[1], std::span<const double>(alpha));
          },
          {{"y", {2, 9}}, {"d", {2, 9}}}, kSmoothTol));
  if (!failed.empty()) {
    std::string msg;
    for (const auto& f : failed) msg += f + "; ";
    return {false, msg};
  }
  return {true, fmt::format("16 ops, max rel err {:.2e}", worst)};
}

models::E2ECfgConfig small_e2e() {
  models::E2ECfgConfig c;
  c.d_model = 16;
  c.heads = 2;
  c.d_ff = 32;
  c.head_hidden = 16;
  c.filter_len = 8;
  c.conv_kernel = 8;
  c.conv_padding = 2;
  c.min_frame_len = 16;
  return c;
}

template <typename Model>
Outcome end_to_end_grads(Model& model, std::size_t frame_len, std::uint64_t seed) {
  dsp::Rng rng({seed, 0x1});
  TensorD frames = random_tensor({2, frame_len}, rng, false);
  TensorD xf = random_tensor({2, frame_len}, rng, false);
  TensorD d = random_tensor({2, frame_len}, rng, false);
  const auto alpha = training::LossWeights::forgetting(frame_len, 0.99).alpha;
  auto loss = [&](nn::Tape<double>& tape) {
    dsp::Rng drop({seed, 0x2});
    nn::Context<double> ctx{tape, nn::Mode::kTrain, &drop};
    TensorD w = model.generate(ctx, frames);
    return nn::weighted_residual_loss(tape, nn::causal_fir(tape, w, xf), d,
                                      std::span<const double>(alpha));
  };
  Targets targets;
  for (const auto& p : model.parameters()) {
    if (p.trainable) targets.emplace_back(p.name, p.tensor);
  }
  return grad_outcome(nn::grad_check(loss, targets, kKinkTol));
}

Outcome e2e_grads() {
  models::E2ECfgModel<double> model(small_e2e(), 3);
  return end_to_end_grads(model, 64, 5);
}

Outcome gfanc_grads() {
  models::GfancConfig c;
  c.channels = 4;
  c.conv_kernel = 8;
  c.conv_padding = 3;
  c.subfilters = 3;
  c.filter_len = 8;
  models::GfancModel<double> model(c, 4);
  dsp::Rng rng({6, 0});
  std::vector<double> src(8);
  for (double& v : src) v = rng.normal();
  model.set_bank(models::build_subfilter_bank(dsp::FirFilter(src), 3));
  return end_to_end_grads(model, 64, 6);
}

Outcome filter_oracle() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    dsp::Rng rng({trial, 0x0AC});
    const std::size_t n = 32, t = 400;
    TensorD w = random_tensor({1, n}, rng, true, 0.1);
    TensorD xf = random_tensor({1, t}, rng, false);
    TensorD d = random_tensor({1, t}, rng, false);
    const auto weights = training::LossWeights::forgetting(t, 0.999);
    nn::Tape<double> tape;
    TensorD y = nn::causal_fir(tape, w, xf);
    TensorD loss = nn::weighted_residual_loss(tape, y, d, std::span<const double>(weights.alpha));
    tape.backward(loss);
    std::vector<double> e(t);
    for (std::size_t i = 0; i < t; ++i) e[i] = d.values()[i] - y.values()[i];
    const auto g = training::filter_grad_oracle(e, xf.values(), weights, n);
    double scale = 0.0, err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      scale = std::max(scale, std::abs(g[k]));
      err = std::max(err, std::abs(g[k] - w.grad()[k]));
    }
    worst = std::max(worst, err / scale);
  }
  return {worst < kSmoothTol, fmt::format("max rel err {:.2e}", worst)};
}

Outcome partition() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    dsp::Rng rng({trial, 0xBA});
    std::vector<double> taps(512);
    for (double& v : taps) v = rng.normal();
    const auto bank = models::build_subfilter_bank(dsp::FirFilter(taps), 15);
    for (std::size_t k = 0; k < 512; ++k) {
      double s = 0.0;
      for (const auto& f : bank.sub_filters) s += f[k];
      worst = std::max(worst, std::abs(s - taps[k]));
    }
  }
  return {worst < 1e-9, fmt::format("100 filters, max abs dev {:.2e}", worst)};
}

Outcome param_counts() {
  models::E2ECfgModel<float> e({}, 1);
  models::GfancModel<float> g({}, 1);
  const auto ne = models::param_count(e), ng = models::param_count(g);
  return {ne == 1201152 && ng == 210703, fmt::format("e2ecfg {} gfanc {}", ne, ng)};
}

Outcome shapes() {
  const models::E2ECfgConfig c;
  const auto conv = c.conv_length(13000), tokens = c.token_count(13000);
  return {conv == 3250 && tokens == 812 && tokens <= c.pos_max_len,
          fmt::format("13000 -> {} -> {} tokens (max {})", conv, tokens, c.pos_max_len)};
}

Outcome flops() {
  const auto e = models::flops_estimate(models::E2ECfgConfig{}, 13000);
  const auto g = models::flops_estimate(models::GfancConfig{}, 13000);
  const bool ok = std::abs(e.total / 782.5e6 - 1.0) <= 0.25 &&
                  std::abs(g.total / 385.9e6 - 1.0) <= 0.25 && e.largest_group(true) == "attention";
  return {ok, fmt::format("e2ecfg {:.1f}M gfanc {:.1f}M, largest {}", e.total / 1e6, g.total / 1e6,
                          e.largest_group(true))};
}

Outcome loss_values() {
  const std::vector<double> e{1, 1, 1};
  const double l = training::loss_frame(e, training::LossWeights::forgetting(3, 0.5));
  const double u = training::loss_frame(e, training::LossWeights::forgetting(3, 1.0));
  return {std::abs(l - 1.75 / 3.0) < 1e-15 && u == training::loss_frame(e),
          fmt::format("T=3 lambda=0.5 loss {:.6f}", l)};
}

Outcome checkpoint_round_trip() {
  models::E2ECfgModel<float> model(small_e2e(), 9);
  training::Checkpoint c;
  c.tensors = training::export_tensors(model.parameters());
  c.metadata = {{"note", "verify"}};
  const std::string a = training::serialize_checkpoint(c);
  const std::string b = training::serialize_checkpoint(training::parse_checkpoint(a));
  models::E2ECfgModel<float> other(small_e2e(), 10);
  training::import_tensors(training::parse_checkpoint(a).tensors, other.parameters());
  const std::string again = [&] {
    training::Checkpoint d = c;
    d.tensors = training::export_tensors(other.parameters());
    return training::serialize_checkpoint(d);
  }();
  return {a == b && a == again, fmt::format("{} bytes", a.size())};
}

Outcome wav_round_trip() {
  const auto path = std::filesystem::temp_directory_path() /
                    fmt::format("anclab_verify_{}.wav", std::chrono::steady_clock::now().time_since_epoch().count());
  dsp::Rng rng({1, 0xAA});
  std::vector<double> s(1000);
  for (double& v : s) v = static_cast<float>(0.5 * rng.normal());
  eval::write_wav(dsp::Signal(s, eval::kWavSampleRate), path);
  const dsp::Signal back = eval::read_wav(path);
  std::filesystem::remove(path);
  return {back.vector() == s, "1000 float samples"};
}

Outcome harness() {
  const auto scene = acoustics::synthesize_scene({}, {1, 0x5C});
  const dsp::Signal x = dsp::generate_bandlimited_noise(20, 490, 2.0, 13000, {1, 0x70});
  dsp::Rng rng({2, 0});
  std::vector<double> taps(64);
  for (double& v : taps) v = 0.1 * rng.normal();
  const dsp::FirFilter w(taps);
  const auto fixed = eval::run_sim(eval::ControllerHandle::fixed(w), x, scene, 2.0);
  const dsp::Signal d = acoustics::disturbance(x, scene);
  const dsp::Signal e =
      acoustics::residual(d, acoustics::apply_control(acoustics::filtered_reference(x, scene), w));
  const bool exact = fixed.e.vector() == e.vector() && fixed.d.vector() == d.vector();

  auto model = std::make_shared<models::E2ECfgModel<float>>(small_e2e(), 11);
  const auto run = eval::run_sim(eval::ControllerHandle::network(model, 1300, 1), x, scene, 2.0);
  const double nr0 = dsp::power_db_ratio(run.d, run.e, {0, 1300});
  return {exact && std::abs(nr0) <= 1e-9,
          fmt::format("fixed filter {}, latency-1 frame-0 NR {:.1e} dB", exact ? "exact" : "differs", nr0)};
}

}  // namespace

std::size_t VerifyReport::passed() const {
  std::size_t n = 0;
  for (const auto& c : checks) n += c.passed ? 1 : 0;
  return n;
}

VerifyReport run_verify(const std::function<void(const CheckResult&)>& on_check) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"param_counts", param_counts},
      {"shape_pipeline", shapes},
      {"flops", flops},
      {"layer_gradients", layer_grads},
      {"e2ecfg_gradients", e2e_grads},
      {"gfanc_gradients", gfanc_grads},
      {"filter_gradient_oracle", filter_oracle},
      {"loss_values", loss_values},
      {"subfilter_partition", partition},
      {"checkpoint_round_trip", checkpoint_round_trip},
      {"wav_round_trip", wav_round_trip},
      {"harness_consistency", harness},
  };
  VerifyReport report;
  for (const auto& [name, fn] : checks) {
    CheckResult r{name, false, "", 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      auto [ok, detail] = fn();
      r.passed = ok;
      r.detail = std::move(detail);
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_check) on_check(r);
    report.checks.push_back(std::move(r));
  }
  return report;
}

}  // namespace anclab::verify
