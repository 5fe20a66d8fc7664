#include "anclab/eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "anclab/acoustics/plant.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/error.hpp"
#include "anclab/nn/layers.hpp"

namespace anclab::eval {
namespace {

std::size_t seconds_to_samples(double seconds, double fs) {
  return static_cast<std::size_t>(std::llround(seconds * fs));
}

dsp::Signal take(const dsp::Signal& noise, std::size_t length, bool loop) {
  if (noise.empty()) throw Error("insufficient noise: empty signal");
  if (noise.size() >= length) return noise.slice(0, length);
  if (!loop) {
    throw Error("insufficient noise: need " + std::to_string(length) + " samples, have " +
                std::to_string(noise.size()));
  }
  std::vector<double> out(length);
  for (std::size_t n = 0; n < length; ++n) out[n] = noise[n % noise.size()];
  return dsp::Signal(std::move(out), noise.sample_rate_hz());
}

// out[n] = sum_k w[k] src[n - k] for n in [begin, end), same summation order
// as dsp::convolve_same.
void fir_range(std::span<const double> src, std::span<const double> w, std::size_t begin,
               std::size_t end, std::span<double> out) {
  for (std::size_t n = begin; n < end; ++n) {
    const std::size_t kmax = std::min(n + 1, w.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += w[k] * src[n - k];
    out[n] = acc;
  }
}

std::vector<double> generate_filter(models::FilterGenerator<float>& model,
                                    std::span<const double> frame) {
  nn::Tape<float> tape;
  nn::NoGradGuard guard(tape);
  nn::Context<float> ctx{tape, nn::Mode::kEval, nullptr};
  nn::Tensor<float> input({1, frame.size()});
  auto v = input.values();
  for (std::size_t i = 0; i < frame.size(); ++i) v[i] = static_cast<float>(frame[i]);
  const nn::Tensor<float> w = model.generate(ctx, input);
  return std::vector<double>(w.values().begin(), w.values().end());
}

}  // namespace

ControllerHandle ControllerHandle::fixed(dsp::FirFilter w, std::string label) {
  ControllerHandle h;
  h.kind = ControllerKind::kFixed;
  h.filter = std::move(w);
  h.label = std::move(label);
  return h;
}

ControllerHandle ControllerHandle::zero(std::size_t filter_len, std::string label) {
  return fixed(dsp::FirFilter::zeros(filter_len), std::move(label));
}

ControllerHandle ControllerHandle::adaptive(const fxnlms::FxnlmsOptions& options, std::string label) {
  ControllerHandle h;
  h.kind = ControllerKind::kFxnlms;
  h.fxnlms = options;
  h.label = std::move(label);
  return h;
}

ControllerHandle ControllerHandle::network(std::shared_ptr<models::FilterGenerator<float>> model,
                                           std::size_t frame_len, std::size_t latency_frames,
                                           std::string label) {
  if (!model) throw ConfigError("generator controller needs a model");
  if (latency_frames > 1) throw ConfigError("filter latency must be 0 or 1 frames");
  model->check_frame_length(frame_len);
  ControllerHandle h;
  h.kind = ControllerKind::kGenerator;
  h.generator = std::move(model);
  h.frame_len = frame_len;
  h.latency_frames = latency_frames;
  h.label = std::move(label);
  return h;
}

std::vector<double> per_second_nr(const dsp::Signal& d, const dsp::Signal& e) {
  const std::size_t fs = static_cast<std::size_t>(std::llround(d.sample_rate_hz()));
  std::vector<double> out;
  for (std::size_t s = 0; (s + 1) * fs <= d.size(); ++s) {
    out.push_back(dsp::power_db_ratio(d, e, {s * fs, (s + 1) * fs}));
  }
  return out;
}

RunResult run_sim(const ControllerHandle& c, const dsp::Signal& noise,
                  const acoustics::AcousticScene& scene, double duration_s, bool loop_noise) {
  if (noise.sample_rate_hz() != scene.sample_rate_hz()) throw ConfigError("sample rate mismatch");
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  const auto start = std::chrono::steady_clock::now();
  const double fs = scene.sample_rate_hz();
  const dsp::Signal x = take(noise, seconds_to_samples(duration_s, fs), loop_noise);
  const std::size_t length = x.size();

  RunResult r;
  if (c.kind == ControllerKind::kFxnlms) {
    fxnlms::FxnlmsResult fx = fxnlms::fxnlms_run(x, scene, c.fxnlms);
    r.d = std::move(fx.d);
    r.y = std::move(fx.y);
    r.e = std::move(fx.e);
  } else {
    r.d = acoustics::disturbance(x, scene);
    // Physical plant: the controller sees x and its output passes through S.
    // Filtered plant: the controller acts on x * S directly.
    const bool physical = c.plant == PlantMode::kPhysical;
    const dsp::Signal src = physical ? x : dsp::convolve(x, scene.secondary());
    std::vector<double> out(length, 0.0);

    if (c.kind == ControllerKind::kFixed) {
      if (c.filter.size() == 0) throw ConfigError("empty filter");
      fir_range(src.samples(), c.filter.taps(), 0, length, out);
    } else {
      if (!c.generator) throw ConfigError("generator controller needs a model");
      const std::size_t frame = c.frame_len;
      const std::size_t taps = c.generator->filter_length();
      std::vector<double> current(taps, 0.0);
      std::vector<double> previous(taps, 0.0);
      std::vector<std::vector<double>> pending;
      std::vector<double> scratch(length, 0.0);
      for (std::size_t begin = 0; begin < length; begin += frame) {
        const std::size_t end = std::min(length, begin + frame);
        const bool complete = end - begin == frame;
        std::vector<double> generated;
        if (complete) {
          generated = generate_filter(*c.generator, x.samples().subspan(begin, frame));
          r.filters_emitted.push_back(generated);
        }
        std::vector<double> next = current;
        if (c.latency_frames == 0) {
          if (complete) next = generated;
        } else if (!pending.empty()) {
          next = pending.front();
          pending.erase(pending.begin());
        }
        if (c.latency_frames == 1 && complete) pending.push_back(generated);
        previous = current;
        current = next;

        fir_range(src.samples(), current, begin, end, out);
        if (c.crossfade && begin > 0) {
          const std::size_t fade_end = std::min(end, begin + kCrossfadeSamples);
          fir_range(src.samples(), previous, begin, fade_end, scratch);
          for (std::size_t n = begin; n < fade_end; ++n) {
            const double a = static_cast<double>(n - begin + 1) / static_cast<double>(kCrossfadeSamples);
            out[n] = (1.0 - a) * scratch[n] + a * out[n];
          }
        }
      }
    }
    dsp::Signal y(std::move(out), fs);
    r.y = physical ? dsp::convolve(y, scene.secondary()) : std::move(y);
    r.e = acoustics::residual(r.d, r.y);
  }
  r.per_second_nr = per_second_nr(r.d, r.e);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double nr_db(const RunResult& result, double window_s) {
  const std::size_t w = seconds_to_samples(window_s, result.d.sample_rate_hz());
  if (w == 0 || w > result.d.size()) throw Error("NR window outside the run");
  return dsp::power_db_ratio(result.d, result.e, {result.d.size() - w, result.d.size()});
}

std::vector<std::pair<double, double>> nmse_curve(const RunResult& result, double window_s) {
  if (!(window_s > 0.0)) throw Error("NMSE window must be positive");
  const double fs = result.d.sample_rate_hz();
  const std::size_t w = seconds_to_samples(window_s, fs);
  if (w == 0 || w > result.d.size()) throw Error("NMSE window longer than the run");
  std::vector<std::pair<double, double>> out;
  for (std::size_t begin = 0; begin + w <= result.d.size(); begin += w) {
    out.emplace_back(static_cast<double>(begin) / fs,
                     dsp::power_db_ratio(result.e, result.d, {begin, begin + w}));
  }
  return out;
}

dsp::Signal build_switch_scenario(const std::vector<dsp::Signal>& sources, double seg_duration_s) {
  if (sources.empty()) throw Error("scenario needs at least one source");
  if (sources.size() < 2) throw Error("scenario needs at least two segments");
  const double fs = sources.front().sample_rate_hz();
  const std::size_t seg = seconds_to_samples(seg_duration_s, fs);
  if (seg == 0) throw Error("segment duration too short");
  std::vector<double> out;
  out.reserve(seg * sources.size());
  for (const auto& s : sources) {
    if (s.sample_rate_hz() != fs) throw Error("scenario sources differ in sample rate");
    if (s.size() < seg) throw Error("scenario source shorter than the segment");
    const auto part = s.samples().subspan(0, seg);
    const double level = dsp::rms(part);
    if (!(level > 0.0)) throw Error("silent signal in scenario");
    for (double v : part) out.push_back(v / level);
  }
  return dsp::Signal(std::move(out), fs);
}

}  // namespace anclab::eval
