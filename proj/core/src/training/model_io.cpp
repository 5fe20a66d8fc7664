#include "anclab/training/model_io.hpp"

#include <cstdint>
#include <ostream>

#include <fmt/format.h>

#include "anclab/config/config.hpp"
#include "anclab/error.hpp"
#include "anclab/version.hpp"

namespace anclab::training {

std::string config_hash(const nlohmann::json& doc) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

Checkpoint model_checkpoint(const models::FilterGenerator<float>& model,
                            const models::ModelSpec& spec, const nlohmann::json& extra) {
  if (model.kind() != spec.kind) throw Error("model kind does not match its spec");
  Checkpoint c;
  c.tensors = export_tensors(model.parameters());
  c.metadata = extra;
  c.metadata["type"] = "model";
  c.metadata["version"] = kVersion;
  c.metadata["model"] = config::to_json(spec);
  return c;
}

models::ModelSpec model_spec(const Checkpoint& checkpoint) {
  const auto& m = checkpoint.metadata;
  if (!m.is_object() || m.value("type", "") != "model" || !m.contains("model")) {
    throw Error("incompatible checkpoint: not a model checkpoint");
  }
  return config::parse_model(m.at("model"));
}

std::unique_ptr<models::FilterGenerator<float>> load_generator(const Checkpoint& checkpoint) {
  auto model = models::make_generator<float>(model_spec(checkpoint));
  import_tensors(checkpoint.tensors, model->parameters());
  return model;
}

std::unique_ptr<models::FilterGenerator<float>> load_generator(const std::filesystem::path& path) {
  return load_generator(load_checkpoint(path));
}

namespace {

TensorRecord taps_record(const std::string& name, const dsp::FirFilter& f) {
  TensorRecord r{name, nn::Shape{f.size()}, {}};
  r.values.reserve(f.size());
  for (double v : f.vector()) r.values.push_back(static_cast<float>(v));
  return r;
}

dsp::FirFilter taps_of(const Checkpoint& c, const std::string& name) {
  const TensorRecord* r = c.find(name);
  if (!r) throw Error("incompatible checkpoint: scene tensor '" + name + "' missing");
  if (r->shape.size() != 1) throw Error("incompatible checkpoint: scene tensor '" + name + "' is not 1-D");
  return dsp::FirFilter(std::vector<double>(r->values.begin(), r->values.end()));
}

}  // namespace

Checkpoint scene_checkpoint(const acoustics::AcousticScene& scene,
                            const acoustics::SceneConfig& config) {
  Checkpoint c;
  c.tensors.push_back(taps_record("primary", scene.primary()));
  c.tensors.push_back(taps_record("secondary", scene.secondary()));
  c.tensors.push_back(taps_record("secondary_estimate", scene.secondary_estimate()));
  c.metadata = {{"type", "scene"},
                {"version", kVersion},
                {"sample_rate_hz", scene.sample_rate_hz()},
                {"scene", config::to_json(config)}};
  return c;
}

acoustics::AcousticScene scene_from_checkpoint(const Checkpoint& c) {
  if (c.metadata.value("type", "") != "scene") {
    throw Error("incompatible checkpoint: not a scene checkpoint");
  }
  return acoustics::AcousticScene(taps_of(c, "primary"), taps_of(c, "secondary"),
                                  taps_of(c, "secondary_estimate"),
                                  c.metadata.at("sample_rate_hz").get<double>());
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,lr,train_loss,val_loss\n";
  for (const auto& r : history) {
    out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.lr, r.train_loss, r.val_loss);
  }
}

nlohmann::json history_json(const std::vector<EpochRecord>& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : history) {
    out.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss},
                   {"val_loss", r.val_loss}});
  }
  return out;
}

}  // namespace anclab::training
