#include "anclab/config/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "anclab/error.hpp"
#include "anclab/version.hpp"

namespace anclab::config {
namespace {

using nlohmann::json;

// Reads optional keys of one JSON object and rejects any key it was not asked
// about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void get(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) fail(key, "a number");
    out = v.get<double>();
  }
  void get(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::size_t>();
  }
  void get(const char* key, std::uint64_t& out, int) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) fail(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void get(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(key, "a boolean");
    out = v.get<bool>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(key, "a string");
    out = v.get<std::string>();
  }
  // null means +inf (no sensor noise).
  void get_or_inf(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (v.is_null()) {
      out = std::numeric_limits<double>::infinity();
      return;
    }
    if (!v.is_number()) fail(key, "a number or null");
    out = v.get<double>();
  }
  const json* child(const char* key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }
  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + path_ + "." + item.key() + "'");
    }
  }

 private:
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(path_ + "." + key + ": expected " + what);
  }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

models::TokenPooling parse_pooling(const std::string& s) {
  if (s == "mean") return models::TokenPooling::kMean;
  if (s == "first") return models::TokenPooling::kFirst;
  if (s == "max") return models::TokenPooling::kMax;
  throw ConfigError("model.e2ecfg.pooling: expected mean, first or max");
}

std::string pooling_name(models::TokenPooling p) {
  switch (p) {
    case models::TokenPooling::kMean: return "mean";
    case models::TokenPooling::kFirst: return "first";
    case models::TokenPooling::kMax: return "max";
  }
  return "mean";
}

training::DatasetSpec parse_dataset(const json& j, training::DatasetSpec d) {
  Section s(j, "dataset");
  s.get("n_train", d.n_train);
  s.get("n_val", d.n_val);
  s.get("n_test", d.n_test);
  s.get("duration_s", d.duration_s);
  s.get("band_low_hz", d.band_low_hz);
  s.get("band_high_hz", d.band_high_hz);
  s.get("min_bandwidth_hz", d.min_bandwidth_hz);
  s.get_or_inf("snr_db", d.snr_db);
  s.finish();
  require(d.n_train > 0 && d.n_val > 0 && d.n_test > 0, "dataset: split counts must be positive");
  require(d.duration_s > 0.0, "dataset.duration_s must be positive");
  return d;
}

training::TrainConfig parse_train(const json& j, training::TrainConfig t) {
  Section s(j, "train");
  s.get("lr0", t.lr0);
  s.get("weight_decay", t.weight_decay);
  s.get("decoupled_weight_decay", t.decoupled_weight_decay);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("scheduler_step", t.scheduler_step);
  s.get("scheduler_gamma", t.scheduler_gamma);
  std::string mode = t.loss_mode == training::LossMode::kWeighted ? "weighted" : "uniform";
  s.get("loss_mode", mode);
  if (mode == "weighted") {
    t.loss_mode = training::LossMode::kWeighted;
  } else if (mode == "uniform") {
    t.loss_mode = training::LossMode::kUniform;
  } else {
    throw ConfigError("train.loss_mode: expected weighted or uniform");
  }
  s.get("lambda", t.lambda);
  s.get("reverse_weights", t.reverse_weights);
  s.get("clip_grad_norm", t.clip_grad_norm);
  s.get("max_val_samples", t.max_val_samples);
  s.get("cache_limit_bytes", t.cache_limit_bytes);
  s.finish();
  require(t.lr0 >= 0.0, "train.lr0 must be non-negative");
  require(t.batch_size > 0, "train.batch_size must be positive");
  require(t.scheduler_step > 0, "train.scheduler_step must be positive");
  require(t.scheduler_gamma > 0.0 && t.scheduler_gamma <= 1.0, "train.scheduler_gamma must be in (0, 1]");
  require(t.lambda > 0.0 && t.lambda <= 1.0, "train.lambda must be in (0, 1]");
  return t;
}

fxnlms::FxnlmsOptions parse_fxnlms(const json& j, fxnlms::FxnlmsOptions o) {
  Section s(j, "eval.fxnlms");
  s.get("mu", o.mu);
  s.get("filter_len", o.filter_len);
  s.get("eps", o.eps);
  s.get("normalized", o.normalized);
  s.get("trace_stride", o.trace_stride);
  s.finish();
  require(o.mu >= 0.0, "eval.fxnlms.mu must be non-negative");
  require(o.filter_len > 0, "eval.fxnlms.filter_len must be positive");
  return o;
}

EvalConfig parse_eval(const json& j, EvalConfig e) {
  Section s(j, "eval");
  s.get("frame_len", e.frame_len);
  s.get("latency_frames", e.latency_frames);
  s.get("crossfade", e.crossfade);
  std::string plant = e.plant == eval::PlantMode::kFiltered ? "filtered" : "physical";
  s.get("plant", plant);
  if (plant == "filtered") {
    e.plant = eval::PlantMode::kFiltered;
  } else if (plant == "physical") {
    e.plant = eval::PlantMode::kPhysical;
  } else {
    throw ConfigError("eval.plant: expected filtered or physical");
  }
  s.get("duration_s", e.duration_s);
  s.get("window_s", e.window_s);
  s.get("nmse_window_s", e.nmse_window_s);
  if (const json* bands = s.child("bands")) {
    if (!bands->is_array()) throw ConfigError("eval.bands: expected an array of [low, high]");
    e.bands.clear();
    for (const auto& b : *bands) {
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        throw ConfigError("eval.bands: expected an array of [low, high]");
      }
      e.bands.push_back({b[0].get<double>(), b[1].get<double>()});
    }
  }
  if (const json* fx = s.child("fxnlms")) e.fxnlms = parse_fxnlms(*fx, e.fxnlms);
  s.finish();
  require(e.latency_frames <= 1, "eval.latency_frames must be 0 or 1");
  require(e.frame_len > 0, "eval.frame_len must be positive");
  require(e.duration_s > 0.0 && e.window_s > 0.0 && e.nmse_window_s > 0.0,
          "eval durations must be positive");
  return e;
}

}  // namespace

acoustics::SceneConfig parse_scene(const json& j) {
  acoustics::SceneConfig c;
  Section s(j, "scene");
  s.get("sample_rate_hz", c.sample_rate_hz);
  s.get("band_low_hz", c.band_low_hz);
  s.get("band_high_hz", c.band_high_hz);
  s.get("primary_taps", c.primary_taps);
  s.get("primary_delay", c.primary_delay);
  s.get("secondary_taps", c.secondary_taps);
  s.get("secondary_delay", c.secondary_delay);
  s.get("estimate_error", c.estimate_error);
  s.finish();
  require(c.sample_rate_hz > 0.0, "scene.sample_rate_hz must be positive");
  require(c.primary_taps % 2 == 1 && c.secondary_taps % 2 == 1, "scene path lengths must be odd");
  if (c.secondary_delay >= c.primary_delay) throw ConfigError("non-causal scene");
  return c;
}

json to_json(const acoustics::SceneConfig& c) {
  return {{"sample_rate_hz", c.sample_rate_hz}, {"band_low_hz", c.band_low_hz},
          {"band_high_hz", c.band_high_hz},     {"primary_taps", c.primary_taps},
          {"primary_delay", c.primary_delay},   {"secondary_taps", c.secondary_taps},
          {"secondary_delay", c.secondary_delay}, {"estimate_error", c.estimate_error}};
}

models::ModelSpec parse_model(const json& j) {
  models::ModelSpec m;
  Section s(j, "model");
  std::string kind = models::to_string(m.kind);
  s.get("kind", kind);
  m.kind = models::parse_model_kind(kind);
  std::size_t filter_len = m.e2ecfg.filter_len;
  s.get("filter_len", filter_len);
  m.e2ecfg.filter_len = filter_len;
  m.gfanc.filter_len = filter_len;
  m.pretrain.filter_len = filter_len;
  s.get("seed", m.seed, 0);
  if (const json* e = s.child("e2ecfg")) {
    Section es(*e, "model.e2ecfg");
    auto& c = m.e2ecfg;
    es.get("d_model", c.d_model);
    es.get("heads", c.heads);
    es.get("d_ff", c.d_ff);
    es.get("conv_kernel", c.conv_kernel);
    es.get("conv_stride", c.conv_stride);
    es.get("conv_padding", c.conv_padding);
    es.get("pool_kernel", c.pool_kernel);
    es.get("pool_stride", c.pool_stride);
    es.get("pos_max_len", c.pos_max_len);
    es.get("head_hidden", c.head_hidden);
    es.get("dropout", c.dropout);
    es.get("bn_momentum", c.bn_momentum);
    es.get("bn_eps", c.bn_eps);
    es.get("ln_eps", c.ln_eps);
    std::string pooling = pooling_name(c.pooling);
    es.get("pooling", pooling);
    c.pooling = parse_pooling(pooling);
    es.get("min_frame_len", c.min_frame_len);
    es.finish();
    require(c.heads > 0 && c.d_model % c.heads == 0, "model.e2ecfg: d_model must be divisible by heads");
    require(c.dropout >= 0.0 && c.dropout < 1.0, "model.e2ecfg.dropout must be in [0, 1)");
  }
  if (const json* g = s.child("gfanc")) {
    Section gs(*g, "model.gfanc");
    auto& c = m.gfanc;
    gs.get("channels", c.channels);
    gs.get("conv_kernel", c.conv_kernel);
    gs.get("conv_stride", c.conv_stride);
    gs.get("conv_padding", c.conv_padding);
    gs.get("pool_kernel", c.pool_kernel);
    gs.get("pool_stride", c.pool_stride);
    gs.get("block_kernel", c.block_kernel);
    gs.get("blocks", c.blocks);
    gs.get("subfilters", c.subfilters);
    gs.get("bn_momentum", c.bn_momentum);
    gs.get("bn_eps", c.bn_eps);
    gs.finish();
    require(c.subfilters >= 1 && c.subfilters <= models::kMaxSubFilters,
            "model.gfanc.subfilters must be in [1, 256]");
  }
  if (const json* p = s.child("pretrain")) {
    Section ps(*p, "model.pretrain");
    auto& c = m.pretrain;
    ps.get("low_hz", c.low_hz);
    ps.get("high_hz", c.high_hz);
    ps.get("duration_s", c.duration_s);
    ps.get("use_fxnlms", c.use_fxnlms);
    ps.get("fxnlms_mu", c.fxnlms_mu);
    ps.finish();
  }
  s.finish();
  return m;
}

json to_json(const models::ModelSpec& m) {
  const auto& e = m.e2ecfg;
  const auto& g = m.gfanc;
  const auto& p = m.pretrain;
  return {{"kind", models::to_string(m.kind)},
          {"filter_len", m.filter_length()},
          {"seed", m.seed},
          {"e2ecfg",
           {{"d_model", e.d_model},
            {"heads", e.heads},
            {"d_ff", e.d_ff},
            {"conv_kernel", e.conv_kernel},
            {"conv_stride", e.conv_stride},
            {"conv_padding", e.conv_padding},
            {"pool_kernel", e.pool_kernel},
            {"pool_stride", e.pool_stride},
            {"pos_max_len", e.pos_max_len},
            {"head_hidden", e.head_hidden},
            {"dropout", e.dropout},
            {"bn_momentum", e.bn_momentum},
            {"bn_eps", e.bn_eps},
            {"ln_eps", e.ln_eps},
            {"pooling", pooling_name(e.pooling)},
            {"min_frame_len", e.min_frame_len}}},
          {"gfanc",
           {{"channels", g.channels},
            {"conv_kernel", g.conv_kernel},
            {"conv_stride", g.conv_stride},
            {"conv_padding", g.conv_padding},
            {"pool_kernel", g.pool_kernel},
            {"pool_stride", g.pool_stride},
            {"block_kernel", g.block_kernel},
            {"blocks", g.blocks},
            {"subfilters", g.subfilters},
            {"bn_momentum", g.bn_momentum},
            {"bn_eps", g.bn_eps}}},
          {"pretrain",
           {{"low_hz", p.low_hz},
            {"high_hz", p.high_hz},
            {"duration_s", p.duration_s},
            {"use_fxnlms", p.use_fxnlms},
            {"fxnlms_mu", p.fxnlms_mu}}}};
}

void Config::propagate_seed() {
  dataset.rng = {seed, 0};
  model.seed = seed;
  train.seed = seed;
}

Config parse_config(const json& doc) {
  Config c;
  Section s(doc, "config");
  s.get("seed", c.seed, 0);
  if (const json* j = s.child("scene")) c.scene = parse_scene(*j);
  if (const json* j = s.child("dataset")) c.dataset = parse_dataset(*j, c.dataset);
  if (const json* j = s.child("model")) {
    c.model = parse_model(*j);
    if (j->contains("seed")) throw ConfigError("model.seed: use the top-level seed");
  }
  if (const json* j = s.child("train")) c.train = parse_train(*j, c.train);
  if (const json* j = s.child("eval")) c.eval = parse_eval(*j, c.eval);
  s.finish();
  c.dataset.sample_rate_hz = c.scene.sample_rate_hz;
  c.propagate_seed();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const Config& c) {
  json model = to_json(c.model);
  model.erase("seed");
  json dataset = training::to_json(c.dataset);
  dataset.erase("seed");
  dataset.erase("sample_rate_hz");
  if (!std::isfinite(c.dataset.snr_db)) dataset["snr_db"] = nullptr;
  const auto& t = c.train;
  json bands = json::array();
  for (const auto& b : c.eval.bands) bands.push_back({b.low_hz, b.high_hz});
  const auto& fx = c.eval.fxnlms;
  return {{"seed", c.seed},
          {"scene", to_json(c.scene)},
          {"dataset", std::move(dataset)},
          {"model", std::move(model)},
          {"train",
           {{"lr0", t.lr0},
            {"weight_decay", t.weight_decay},
            {"decoupled_weight_decay", t.decoupled_weight_decay},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"scheduler_step", t.scheduler_step},
            {"scheduler_gamma", t.scheduler_gamma},
            {"loss_mode", t.loss_mode == training::LossMode::kWeighted ? "weighted" : "uniform"},
            {"lambda", t.lambda},
            {"reverse_weights", t.reverse_weights},
            {"clip_grad_norm", t.clip_grad_norm},
            {"max_val_samples", t.max_val_samples},
            {"cache_limit_bytes", t.cache_limit_bytes}}},
          {"eval",
           {{"frame_len", c.eval.frame_len},
            {"latency_frames", c.eval.latency_frames},
            {"crossfade", c.eval.crossfade},
            {"plant", c.eval.plant == eval::PlantMode::kFiltered ? "filtered" : "physical"},
            {"duration_s", c.eval.duration_s},
            {"window_s", c.eval.window_s},
            {"nmse_window_s", c.eval.nmse_window_s},
            {"bands", std::move(bands)},
            {"fxnlms",
             {{"mu", fx.mu},
              {"filter_len", fx.filter_len},
              {"eps", fx.eps},
              {"normalized", fx.normalized},
              {"trace_stride", fx.trace_stride}}}}}};
}

void echo_config(const Config& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json doc = to_json(config);
  doc["version"] = kVersion;
  std::ofstream out(dir / "config.json");
  if (!out) throw Error("cannot write " + (dir / "config.json").string());
  out << doc.dump(2) << "\n";
}

}  // namespace anclab::config
