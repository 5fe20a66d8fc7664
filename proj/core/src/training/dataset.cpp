#include "anclab/training/dataset.hpp"

#include <cmath>

#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"

namespace anclab::training {

namespace {

constexpr int kBandRetries = 16;
constexpr std::uint64_t kNoiseChild = 1;

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "'");
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::size_t DatasetSpec::count(Split split) const {
  switch (split) {
    case Split::kTrain: return n_train;
    case Split::kVal: return n_val;
    case Split::kTest: return n_test;
  }
  return 0;
}

std::size_t DatasetSpec::frame_length() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
}

Dataset::Dataset(DatasetSpec spec, std::vector<SampleInfo> samples)
    : spec_(std::move(spec)), samples_(std::move(samples)) {}

std::vector<SampleInfo> Dataset::split(Split split) const {
  std::vector<SampleInfo> out;
  for (const auto& s : samples_) {
    if (s.split == split) out.push_back(s);
  }
  return out;
}

dsp::Signal Dataset::synthesize(const SampleInfo& sample) const {
  return dsp::generate_bandlimited_noise(sample.low_hz, sample.high_hz, spec_.duration_s,
                                         spec_.sample_rate_hz,
                                         dsp::derive({spec_.rng.seed, sample.stream_id}, kNoiseChild));
}

std::uint64_t sample_stream(Split split, std::size_t index) {
  return (static_cast<std::uint64_t>(split) + 1) << 40 | static_cast<std::uint64_t>(index);
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.n_train == 0 || spec.n_val == 0 || spec.n_test == 0) {
    throw ConfigError("dataset split counts must be positive");
  }
  if (!(spec.duration_s > 0.0) || !(spec.sample_rate_hz > 0.0)) {
    throw ConfigError("dataset duration and sample rate must be positive");
  }
  if (!(spec.band_low_hz > 0.0) || !(spec.band_high_hz < spec.sample_rate_hz / 2.0) ||
      !(spec.min_bandwidth_hz > 0.0) ||
      !(spec.band_low_hz + spec.min_bandwidth_hz < spec.band_high_hz)) {
    throw ConfigError("invalid band: dataset band range cannot hold the minimum bandwidth");
  }
  std::vector<SampleInfo> samples;
  samples.reserve(spec.n_train + spec.n_val + spec.n_test);
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (std::size_t i = 0; i < spec.count(split); ++i) {
      const std::uint64_t stream = sample_stream(split, i);
      dsp::Rng rng({spec.rng.seed, stream});
      SampleInfo info{split, i, stream, 0.0, 0.0};
      int attempt = 0;
      for (; attempt < kBandRetries; ++attempt) {
        const double low = rng.uniform(spec.band_low_hz, spec.band_high_hz - spec.min_bandwidth_hz);
        const double width = rng.uniform(spec.min_bandwidth_hz, spec.band_high_hz - low);
        info.low_hz = low;
        info.high_hz = low + width;
        if (info.high_hz - info.low_hz >= spec.min_bandwidth_hz && info.high_hz <= spec.band_high_hz) {
          break;
        }
      }
      if (attempt == kBandRetries) throw Error("invalid band after retries for sample " + std::to_string(i));
      samples.push_back(info);
    }
  }
  return Dataset(spec, std::move(samples));
}

nlohmann::json to_json(const DatasetSpec& spec) {
  return {{"n_train", spec.n_train},
          {"n_val", spec.n_val},
          {"n_test", spec.n_test},
          {"duration_s", spec.duration_s},
          {"sample_rate_hz", spec.sample_rate_hz},
          {"band_low_hz", spec.band_low_hz},
          {"band_high_hz", spec.band_high_hz},
          {"min_bandwidth_hz", spec.min_bandwidth_hz},
          {"snr_db", spec.snr_db},
          {"seed", spec.rng.seed}};
}

nlohmann::json manifest(const Dataset& dataset) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : dataset.samples()) {
    samples.push_back({{"split", to_string(s.split)},
                       {"index", s.index},
                       {"stream_id", s.stream_id},
                       {"low_hz", s.low_hz},
                       {"high_hz", s.high_hz}});
  }
  return {{"spec", to_json(dataset.spec())}, {"samples", std::move(samples)}};
}

Dataset dataset_from_manifest(const nlohmann::json& m) {
  try {
    const auto& js = m.at("spec");
    DatasetSpec spec;
    spec.n_train = js.at("n_train").get<std::size_t>();
    spec.n_val = js.at("n_val").get<std::size_t>();
    spec.n_test = js.at("n_test").get<std::size_t>();
    spec.duration_s = js.at("duration_s").get<double>();
    spec.sample_rate_hz = js.at("sample_rate_hz").get<double>();
    spec.band_low_hz = js.at("band_low_hz").get<double>();
    spec.band_high_hz = js.at("band_high_hz").get<double>();
    spec.min_bandwidth_hz = js.at("min_bandwidth_hz").get<double>();
    spec.snr_db = js.at("snr_db").get<double>();
    spec.rng = {js.at("seed").get<std::uint64_t>(), 0};
    std::vector<SampleInfo> samples;
    for (const auto& s : m.at("samples")) {
      samples.push_back({parse_split(s.at("split").get<std::string>()), s.at("index").get<std::size_t>(),
                         s.at("stream_id").get<std::uint64_t>(), s.at("low_hz").get<double>(),
                         s.at("high_hz").get<double>()});
    }
    return Dataset(spec, std::move(samples));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed dataset manifest: ") + e.what());
  }
}

}  // namespace anclab::training
