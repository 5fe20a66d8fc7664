#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anclab/dsp/rng.hpp"
#include "anclab/dsp/signal.hpp"

namespace anclab::training {

enum class Split { kTrain = 0, kVal = 1, kTest = 2 };

std::string to_string(Split split);

struct DatasetSpec {
  std::size_t n_train = 79977;
  std::size_t n_val = 2000;
  std::size_t n_test = 2000;
  double duration_s = 1.0;
  double sample_rate_hz = 13000.0;
  double band_low_hz = 20.0;
  double band_high_hz = 1900.0;
  double min_bandwidth_hz = 100.0;
  // Sensor noise added to the filtered reference during training.
  double snr_db = 10.0;
  dsp::RngSpec rng{20240601, 0};

  std::size_t count(Split split) const;
  std::size_t frame_length() const;
};

struct SampleInfo {
  Split split = Split::kTrain;
  std::size_t index = 0;
  std::uint64_t stream_id = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

// Band parameters for every sample. Noise is synthesized on demand from the
// sample's own stream, so any sample can be regenerated independently.
class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetSpec spec, std::vector<SampleInfo> samples);

  const DatasetSpec& spec() const { return spec_; }
  const std::vector<SampleInfo>& samples() const { return samples_; }
  // Samples of one split, in index order.
  std::vector<SampleInfo> split(Split split) const;
  std::size_t size() const { return samples_.size(); }

  dsp::Signal synthesize(const SampleInfo& sample) const;

 private:
  DatasetSpec spec_;
  std::vector<SampleInfo> samples_;
};

// Stream id of sample `index` in `split`: (split + 1) << 40 | index.
std::uint64_t sample_stream(Split split, std::size_t index);

Dataset generate_dataset(const DatasetSpec& spec);

nlohmann::json manifest(const Dataset& dataset);
Dataset dataset_from_manifest(const nlohmann::json& manifest);

nlohmann::json to_json(const DatasetSpec& spec);

}  // namespace anclab::training
