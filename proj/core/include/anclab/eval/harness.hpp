#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/signal.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/models/generator.hpp"

namespace anclab::eval {

// kFiltered: y = w * (x * S), the filter acting on the filtered reference.
// kPhysical: u = w * x drives the secondary path, y = u * S. Both coincide for
// a fixed filter; they differ only in how a filter switch propagates.
enum class PlantMode { kFiltered, kPhysical };

enum class ControllerKind { kFxnlms, kFixed, kGenerator };

inline constexpr std::size_t kCrossfadeSamples = 64;

struct ControllerHandle {
  ControllerKind kind = ControllerKind::kFixed;
  std::string label;
  dsp::FirFilter filter;
  std::shared_ptr<models::FilterGenerator<float>> generator;
  fxnlms::FxnlmsOptions fxnlms;
  std::size_t frame_len = 13000;
  // A filter generated from frame i is used from frame i + latency_frames.
  std::size_t latency_frames = 1;
  bool crossfade = false;
  PlantMode plant = PlantMode::kFiltered;

  static ControllerHandle fixed(dsp::FirFilter w, std::string label = "fixed");
  static ControllerHandle zero(std::size_t filter_len, std::string label = "zero");
  static ControllerHandle adaptive(const fxnlms::FxnlmsOptions& options, std::string label = "fxnlms");
  // Throws ConfigError when the model cannot consume frames of frame_len.
  static ControllerHandle network(std::shared_ptr<models::FilterGenerator<float>> model,
                                  std::size_t frame_len, std::size_t latency_frames,
                                  std::string label = "model");
};

struct RunResult {
  dsp::Signal d;
  dsp::Signal y;
  dsp::Signal e;
  std::vector<double> per_second_nr;
  // Generator runs: the filter produced from each complete frame.
  std::vector<std::vector<double>> filters_emitted;
  double wall_time_s = 0.0;
};

// Runs `controller` on the first duration_s seconds of `noise`. With
// loop_noise, a short noise is repeated; otherwise it must be long enough.
RunResult run_sim(const ControllerHandle& controller, const dsp::Signal& noise,
                  const acoustics::AcousticScene& scene, double duration_s, bool loop_noise = false);

// NR over the last `window_s` seconds: samples [T - window, T).
double nr_db(const RunResult& result, double window_s);

// Hop = window. Points (window start in s, 10 log10(sum e^2 / sum d^2)).
std::vector<std::pair<double, double>> nmse_curve(const RunResult& result, double window_s);

// Per-second NR of the run, one value per whole second.
std::vector<double> per_second_nr(const dsp::Signal& d, const dsp::Signal& e);

// First seg_duration_s of each source, scaled to unit RMS, concatenated.
dsp::Signal build_switch_scenario(const std::vector<dsp::Signal>& sources, double seg_duration_s);

}  // namespace anclab::eval
