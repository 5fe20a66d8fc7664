#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anclab/acoustics/scene.hpp"
#include "anclab/models/factory.hpp"
#include "anclab/training/checkpoint.hpp"
#include "anclab/training/trainer.hpp"

namespace anclab::training {

// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

// Metadata: {"type": "model", "version", "model": spec, ...extra}.
Checkpoint model_checkpoint(const models::FilterGenerator<float>& model,
                            const models::ModelSpec& spec,
                            const nlohmann::json& extra = nlohmann::json::object());
models::ModelSpec model_spec(const Checkpoint& checkpoint);
// Rebuilds the architecture recorded in the metadata and loads its tensors.
std::unique_ptr<models::FilterGenerator<float>> load_generator(const Checkpoint& checkpoint);
std::unique_ptr<models::FilterGenerator<float>> load_generator(const std::filesystem::path& path);

// Tensors "primary", "secondary", "secondary_estimate"; metadata records the
// generating config and the sample rate.
Checkpoint scene_checkpoint(const acoustics::AcousticScene& scene,
                            const acoustics::SceneConfig& config);
acoustics::AcousticScene scene_from_checkpoint(const Checkpoint& checkpoint);

// "epoch,lr,train_loss,val_loss".
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);
nlohmann::json history_json(const std::vector<EpochRecord>& history);

}  // namespace anclab::training
