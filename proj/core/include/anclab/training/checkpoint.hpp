#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anclab/nn/layers.hpp"
#include "anclab/nn/optim.hpp"

namespace anclab::training {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   "ANCL" u32 version u32 count
//   count x { u16 name_len, name, u8 rank, rank x u32 dim, float32 values }
//   u8 has_optimizer
//   [u64 step, u32 count, count x { u16 name_len, name, u32 n, n x f32 m, n x f32 v }]
//   u32 json_len, JSON metadata
struct TensorRecord {
  std::string name;
  nn::Shape shape;
  std::vector<float> values;
};

struct OptimizerRecord {
  std::string name;
  std::vector<float> m;
  std::vector<float> v;
};

struct OptimizerBlock {
  std::uint64_t step = 0;
  std::vector<OptimizerRecord> entries;
};

struct Checkpoint {
  std::vector<TensorRecord> tensors;
  std::optional<OptimizerBlock> optimizer;
  nlohmann::json metadata = nlohmann::json::object();

  const TensorRecord* find(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws "incompatible checkpoint" on a bad magic or version, and a
// truncation error when the buffer ends early.
Checkpoint parse_checkpoint(std::string_view bytes);

// Writes to a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
std::vector<TensorRecord> export_tensors(const nn::ParamList<T>& params);

// Copies every tensor of `params` from the checkpoint. Nothing is modified
// unless all names and shapes match; otherwise throws listing the missing,
// unexpected and mis-shaped names.
template <typename T>
void import_tensors(const std::vector<TensorRecord>& records, const nn::ParamList<T>& params);

template <typename T>
OptimizerBlock export_optimizer(const nn::Adam<T>& adam);
template <typename T>
void import_optimizer(const OptimizerBlock& block, nn::Adam<T>& adam);

}  // namespace anclab::training
