#include "anclab/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anclab/dsp/rng.hpp"

namespace anclab::nn {

GradCheckReport grad_check(const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                           const std::vector<std::pair<std::string, Tensor<double>>>& targets,
                           double tolerance, const GradCheckOptions& options) {
  std::vector<Tensor<double>> tensors;
  for (const auto& [name, t] : targets) {
    tensors.push_back(t);
    tensors.back().zero_grad();
  }

  Tape<double> tape;
  Tensor<double> loss = loss_fn(tape);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& t : tensors) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto evaluate = [&]() {
    Tape<double> probe;
    probe.set_recording(false);
    return loss_fn(probe).item();
  };

  double global_scale = 0.0;
  for (const auto& g : analytic) {
    for (double v : g) global_scale = std::max(global_scale, std::abs(v));
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  dsp::Rng rng({options.seed, 0x6C});
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto values = tensors[t].values();
    std::vector<std::size_t> indices(values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_elements != 0 && indices.size() > options.max_elements) {
      for (std::size_t i = 0; i < options.max_elements; ++i) {
        const std::size_t j = i + rng.below(indices.size() - i);
        std::swap(indices[i], indices[j]);
      }
      indices.resize(options.max_elements);
    }
    // Tensors with an identically zero gradient (a bias feeding a norm) are
    // judged against the gradient scale of the whole model.
    double scale = options.floor * global_scale;
    for (double g : analytic[t]) scale = std::max(scale, std::abs(g));

    GradCheckEntry entry{targets[t].first, indices.size(), 0.0};
    for (std::size_t idx : indices) {
      const double saved = values[idx];
      values[idx] = saved + options.step;
      const double up = evaluate();
      values[idx] = saved - options.step;
      const double down = evaluate();
      values[idx] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[t][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor * scale, 1e-300});
      const double err = std::abs(a - numeric) / denom;
      entry.max_rel_error = std::max(entry.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace anclab::nn
