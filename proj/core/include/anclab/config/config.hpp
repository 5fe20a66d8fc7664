#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "anclab/acoustics/scene.hpp"
#include "anclab/eval/harness.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/models/factory.hpp"
#include "anclab/training/dataset.hpp"
#include "anclab/training/trainer.hpp"

namespace anclab::config {

struct Band {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

struct EvalConfig {
  std::size_t frame_len = 13000;
  std::size_t latency_frames = 1;
  bool crossfade = false;
  eval::PlantMode plant = eval::PlantMode::kFiltered;
  double duration_s = 5.0;
  double window_s = 1.0;
  double nmse_window_s = 0.1;
  std::vector<Band> bands = {{20, 490}, {490, 960}, {20, 960}, {1430, 1900}};
  fxnlms::FxnlmsOptions fxnlms;
};

// Every field defaults to the full-size experiment. A single seed drives the
// scene, dataset, initialization, training and evaluation streams.
struct Config {
  std::uint64_t seed = 2024;
  acoustics::SceneConfig scene;
  training::DatasetSpec dataset;
  models::ModelSpec model;
  training::TrainConfig train;
  EvalConfig eval;

  dsp::RngSpec scene_rng() const { return {seed, 0x5C}; }
  dsp::RngSpec eval_rng() const { return {seed, 0xE7}; }
  // Copies the seed into the sections that carry one.
  void propagate_seed();
};

// Strict parse: unknown keys and wrong types throw ConfigError.
Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);
nlohmann::json to_json(const Config& config);

models::ModelSpec parse_model(const nlohmann::json& section);
nlohmann::json to_json(const models::ModelSpec& spec);
acoustics::SceneConfig parse_scene(const nlohmann::json& section);
nlohmann::json to_json(const acoustics::SceneConfig& scene);

// Writes config.json (resolved config plus the tool version) into `dir`.
void echo_config(const Config& config, const std::filesystem::path& dir);

}  // namespace anclab::config
