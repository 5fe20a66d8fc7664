#include "anclab/models/flops.hpp"

namespace anclab::models {
namespace {

class Builder {
 public:
  void add(std::string name, std::string group, double flops, bool profiled) {
    report_.layers.push_back({std::move(name), std::move(group), flops, profiled});
    report_.full_total += flops;
    if (profiled) report_.total += flops;
  }
  FlopsReport finish() { return std::move(report_); }

 private:
  FlopsReport report_;
};

double conv_flops(double cin, double cout, double kernel, double out_len) {
  return 2.0 * cin * cout * kernel * out_len;
}

double linear_flops(double in, double out, double rows) { return 2.0 * in * out * rows; }

}  // namespace

std::map<std::string, double> FlopsReport::group_totals(bool profiled_only) const {
  std::map<std::string, double> out;
  for (const auto& layer : layers) {
    if (!profiled_only || layer.profiled) out[layer.group] += layer.flops;
  }
  return out;
}

std::string FlopsReport::largest_group(bool profiled_only) const {
  std::string best;
  double best_flops = -1.0;
  for (const auto& [group, flops] : group_totals(profiled_only)) {
    if (flops > best_flops) {
      best = group;
      best_flops = flops;
    }
  }
  return best;
}

FlopsReport flops_estimate(const E2ECfgConfig& c, std::size_t frame_len) {
  const double lc = static_cast<double>(c.conv_length(frame_len));
  const double s = static_cast<double>(c.token_count(frame_len));
  const double d = static_cast<double>(c.d_model);
  const double h = static_cast<double>(c.heads);
  const double ff = static_cast<double>(c.d_ff);
  Builder b;
  b.add("front.conv", "front", conv_flops(1, d, static_cast<double>(c.conv_kernel), lc), true);
  b.add("front.bn", "norm", 2.0 * d * lc, false);
  b.add("front.relu", "elementwise", d * lc, false);
  b.add("front.pool", "elementwise", d * lc, false);
  b.add("pos_enc", "elementwise", s * d, false);
  b.add("enc.ln1", "norm", 5.0 * s * d, false);
  b.add("enc.attn.qkv", "attention", 3.0 * linear_flops(d, d, s), false);
  b.add("enc.attn.scores", "attention", 2.0 * s * s * d, true);
  b.add("enc.attn.softmax", "attention", h * s * s, false);
  b.add("enc.attn.context", "attention", 2.0 * s * s * d, true);
  b.add("enc.attn.o", "attention", linear_flops(d, d, s), false);
  b.add("enc.residual1", "elementwise", s * d, false);
  b.add("enc.ln2", "norm", 5.0 * s * d, false);
  b.add("enc.ff.fc1", "feedforward", linear_flops(d, ff, s), false);
  b.add("enc.ff.relu", "feedforward", s * ff, false);
  b.add("enc.ff.fc2", "feedforward", linear_flops(ff, d, s), false);
  b.add("enc.residual2", "elementwise", s * d, false);
  b.add("token_pool", "elementwise", s * d, false);
  const double hidden = static_cast<double>(c.head_hidden);
  b.add("head.fc1", "head", linear_flops(d, hidden, 1), true);
  b.add("head.relu", "head", hidden, false);
  b.add("head.fc2", "head", linear_flops(hidden, static_cast<double>(c.filter_len), 1), true);
  return b.finish();
}

FlopsReport flops_estimate(const GfancConfig& c, std::size_t frame_len) {
  const double lc = static_cast<double>(c.conv_length(frame_len));
  const double lp = static_cast<double>(c.pooled_length(frame_len));
  const double ch = static_cast<double>(c.channels);
  const double k = static_cast<double>(c.block_kernel);
  Builder b;
  b.add("front.conv", "front", conv_flops(1, ch, static_cast<double>(c.conv_kernel), lc), true);
  b.add("front.bn", "norm", 2.0 * ch * lc, false);
  b.add("front.relu", "elementwise", ch * lc, false);
  b.add("front.pool", "elementwise", ch * lc, false);
  for (std::size_t i = 0; i < c.blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    b.add(p + ".conv1", "blocks", conv_flops(ch, ch, k, lp), true);
    b.add(p + ".bn1", "norm", 2.0 * ch * lp, false);
    b.add(p + ".relu1", "elementwise", ch * lp, false);
    b.add(p + ".conv2", "blocks", conv_flops(ch, ch, k, lp), true);
    b.add(p + ".bn2", "norm", 2.0 * ch * lp, false);
    b.add(p + ".add_relu", "elementwise", 2.0 * ch * lp, false);
  }
  b.add("avg_pool", "elementwise", ch * lp, false);
  const double m = static_cast<double>(c.subfilters);
  b.add("fc", "head", linear_flops(ch, m, 1), true);
  b.add("sigmoid", "head", m, false);
  b.add("combine", "head", linear_flops(m, static_cast<double>(c.filter_len), 1), false);
  return b.finish();
}

}  // namespace anclab::models
