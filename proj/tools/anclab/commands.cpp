#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "anclab/config/config.hpp"
#include "anclab/dsp/metrics.hpp"
#include "anclab/error.hpp"
#include "anclab/eval/harness.hpp"
#include "anclab/eval/report.hpp"
#include "anclab/eval/wav.hpp"
#include "anclab/fxnlms/fxnlms.hpp"
#include "anclab/fxnlms/wiener.hpp"
#include "anclab/models/gfanc.hpp"
#include "anclab/models/subfilter_bank.hpp"
#include "anclab/parallel.hpp"
#include "anclab/training/model_io.hpp"
#include "anclab/verify/verify.hpp"

namespace anclab::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

config::Config resolve(const Options& o) {
  config::Config c = o.config.empty() ? config::Config{} : config::load_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.propagate_seed();
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  return c;
}

fs::path prepare(const Options& o, const config::Config& c) {
  const fs::path dir(o.out);
  config::echo_config(c, dir);
  return dir;
}

template <typename... Args>
void say(const Options& o, fmt::format_string<Args...> f, Args&&... args) {
  if (!o.quiet) fmt::print(f, std::forward<Args>(args)...);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& doc) { open_out(path) << doc.dump(2) << "\n"; }

acoustics::AcousticScene load_scene(const Options& o, const config::Config& c) {
  if (!o.scene.empty()) return training::scene_from_checkpoint(training::load_checkpoint(o.scene));
  return acoustics::synthesize_scene(c.scene, c.scene_rng());
}

std::pair<double, double> parse_band(const std::string& s) {
  const auto dash = s.find('-');
  try {
    if (dash == std::string::npos) throw std::invalid_argument(s);
    return {std::stod(s.substr(0, dash)), std::stod(s.substr(dash + 1))};
  } catch (const std::exception&) {
    throw ConfigError("invalid band '" + s + "', expected LOW-HIGH");
  }
}

std::vector<std::pair<double, double>> eval_bands(const config::Config& c) {
  std::vector<std::pair<double, double>> out;
  for (const auto& b : c.eval.bands) out.emplace_back(b.low_hz, b.high_hz);
  return out;
}

// The chosen single noise: a WAV, or band noise drawn like the first compare row.
eval::NoiseCase single_noise(const Options& o, const config::Config& c, double duration_s) {
  if (!o.noise.empty()) {
    return {fs::path(o.noise).stem().string(), "real", eval::read_wav(o.noise)};
  }
  auto band = o.band.empty() ? eval_bands(c).at(0) : parse_band(o.band);
  return eval::synthetic_band_cases({band}, duration_s, c.scene.sample_rate_hz, c.eval_rng()).at(0);
}

eval::ControllerHandle adaptive(const config::Config& c) {
  return eval::ControllerHandle::adaptive(c.eval.fxnlms, "fxnlms");
}

eval::ControllerHandle network(const std::string& path, const config::Config& c) {
  std::shared_ptr<models::FilterGenerator<float>> model = training::load_generator(path);
  auto h = eval::ControllerHandle::network(model, c.eval.frame_len, c.eval.latency_frames,
                                           fs::path(path).stem().string());
  h.crossfade = c.eval.crossfade;
  h.plant = c.eval.plant;
  return h;
}

void write_nr_plot(const fs::path& path, const std::vector<double>& nr) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < nr.size(); ++i) pts.emplace_back(static_cast<double>(i + 1), nr[i]);
  eval::write_plot_data(path, pts);
}

void write_wave_plot(const fs::path& path, const dsp::Signal& s) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    pts.emplace_back(static_cast<double>(i) / s.sample_rate_hz(), s[i]);
  }
  eval::write_plot_data(path, pts);
}

void write_run(const fs::path& dir, const eval::RunResult& r, double nmse_window_s) {
  auto out = open_out(dir / "run.csv");
  eval::write_run_csv(out, r);
  write_wave_plot(dir / "plot_d.csv", r.d);
  write_wave_plot(dir / "plot_e.csv", r.e);
  write_nr_plot(dir / "plot_nr.csv", r.per_second_nr);
  eval::write_plot_data(dir / "plot_nmse.csv", eval::nmse_curve(r, nmse_window_s));
}

json scene_summary(const acoustics::AcousticScene& s, const acoustics::SceneConfig& c) {
  auto path = [](const dsp::FirFilter& f) {
    return json{{"length", f.size()}, {"delay", f.first_nonzero()}};
  };
  return {{"sample_rate_hz", s.sample_rate_hz()},
          {"band_hz", {c.band_low_hz, c.band_high_hz}},
          {"primary", path(s.primary())},
          {"secondary", path(s.secondary())},
          {"secondary_estimate", path(s.secondary_estimate())},
          {"estimate_error", c.estimate_error}};
}

}  // namespace

int gen_scene(const Options& o) {
  const auto c = resolve(o);
  const auto scene = acoustics::synthesize_scene(c.scene, c.scene_rng());
  const fs::path dir = prepare(o, c);
  training::save_checkpoint(training::scene_checkpoint(scene, c.scene), dir / "scene.ancl");
  write_json(dir / "scene.json", scene_summary(scene, c.scene));
  say(o, "scene: P {} taps (delay {}), S {} taps (delay {}) -> {}\n", scene.primary().size(),
      scene.primary().first_nonzero(), scene.secondary().size(), scene.secondary().first_nonzero(),
      (dir / "scene.ancl").string());
  return 0;
}

int gen_data(const Options& o) {
  const auto c = resolve(o);
  const auto dataset = training::generate_dataset(c.dataset);
  const fs::path dir = prepare(o, c);
  write_json(dir / "manifest.json", training::manifest(dataset));
  std::vector<training::SampleInfo> files;
  for (auto split : {training::Split::kTrain, training::Split::kVal, training::Split::kTest}) {
    auto samples = dataset.split(split);
    if (o.max_files > 0 && samples.size() > o.max_files) samples.resize(o.max_files);
    fs::create_directories(dir / "samples" / training::to_string(split));
    files.insert(files.end(), samples.begin(), samples.end());
  }
  parallel_for(files.size(), [&](std::size_t i) {
    const auto& s = files[i];
    eval::write_wav(dataset.synthesize(s),
                    dir / "samples" / training::to_string(s.split) / fmt::format("{:06}.wav", s.index));
  });
  say(o, "dataset: {} samples, {} WAV files -> {}\n", dataset.size(), files.size(), dir.string());
  return 0;
}

int train(const Options& o) {
  const auto c = resolve(o);
  const auto scene = load_scene(o, c);
  const auto dataset = training::generate_dataset(c.dataset);
  auto model = models::make_generator<float>(c.model);
  if (c.model.kind == models::ModelKind::kGfanc) {
    auto pre = c.model.pretrain;
    pre.filter_len = c.model.gfanc.filter_len;
    const auto source = models::pretrain_wideband_filter(scene, {c.seed, 0xBA4}, pre);
    static_cast<models::GfancModel<float>&>(*model).set_bank(
        models::build_subfilter_bank(source, c.model.gfanc.subfilters));
  }
  const fs::path dir = prepare(o, c);
  say(o, "{}: {} trainable parameters, {} train / {} val samples\n", models::to_string(c.model.kind),
      models::param_count(*model), dataset.spec().n_train, dataset.spec().n_val);

  const std::string hash = training::config_hash(config::to_json(c));
  auto metadata = [&](std::size_t epoch) {
    return json{{"epoch", epoch}, {"config_hash", hash},
                {"scene", o.scene.empty() ? json("config") : json(o.scene)}};
  };
  auto on_epoch = [&](const training::EpochRecord& r) {
    say(o, "epoch {:3}  lr {:.3g}  train {:.6f}  val {:.6f}\n", r.epoch, r.lr, r.train_loss, r.val_loss);
    if (o.save_every > 0 && r.epoch % o.save_every == 0) {
      fs::create_directories(dir / "checkpoints");
      training::save_checkpoint(training::model_checkpoint(*model, c.model, metadata(r.epoch)),
                                dir / "checkpoints" / fmt::format("epoch_{:03}.ancl", r.epoch));
    }
  };
  const auto result = training::train(*model, c.train, dataset, scene, on_epoch);

  json meta = metadata(result.best_epoch);
  meta["best_val_loss"] = result.best_val_loss;
  meta["history"] = training::history_json(result.history);
  auto ckpt = training::model_checkpoint(*model, c.model, meta);
  if (!result.history.empty()) ckpt.optimizer = result.optimizer;
  training::save_checkpoint(ckpt, dir / "model.ancl");
  {
    auto out = open_out(dir / "history.csv");
    training::write_history_csv(out, result.history);
  }
  auto out = open_out(dir / "batch_losses.csv");
  out << "batch,loss\n";
  for (std::size_t i = 0; i < result.batch_losses.size(); ++i) {
    out << i << ',' << eval::format_double(result.batch_losses[i]) << '\n';
  }
  say(o, "best epoch {} (val {:.6f}) -> {}\n", result.best_epoch, result.best_val_loss,
      (dir / "model.ancl").string());
  return 0;
}

int evaluate(const Options& o) {
  const auto c = resolve(o);
  const auto scene = load_scene(o, c);
  double duration = c.eval.duration_s;
  eval::NoiseCase noise;
  if (o.switch_seconds > 0.0) {
    std::vector<dsp::Signal> sources;
    for (auto& n : eval::synthetic_band_cases(eval_bands(c), o.switch_seconds,
                                              c.scene.sample_rate_hz, c.eval_rng())) {
      sources.push_back(std::move(n.signal));
    }
    noise = {"switch", "scenario", eval::build_switch_scenario(sources, o.switch_seconds)};
    duration = noise.signal.duration_s();
  } else {
    noise = single_noise(o, c, duration);
  }
  if (o.checkpoints.size() > 1) throw ConfigError("evaluate takes one --checkpoint");
  std::string kind = o.controller;
  if (kind.empty()) kind = o.checkpoints.empty() ? "fxnlms" : "model";

  eval::ControllerHandle h;
  if (kind == "model") {
    if (o.checkpoints.empty()) throw ConfigError("controller 'model' needs --checkpoint");
    h = network(o.checkpoints.front(), c);
  } else if (kind == "fxnlms") {
    h = adaptive(c);
  } else if (kind == "zero") {
    h = eval::ControllerHandle::zero(c.model.filter_length());
  } else {
    h = eval::ControllerHandle::fixed(
        fxnlms::wiener_oracle(noise.signal, scene, c.model.filter_length()), "wiener");
  }

  const auto r = eval::run_sim(h, noise.signal, scene, duration, o.loop);
  const double nr = eval::nr_db(r, c.eval.window_s);
  const fs::path dir = prepare(o, c);
  write_run(dir, r, c.eval.nmse_window_s);
  write_json(dir / "summary.json", {{"controller", h.label},
                                    {"noise", noise.name},
                                    {"duration_s", duration},
                                    {"window_s", c.eval.window_s},
                                    {"nr_db", nr},
                                    {"per_second_nr", r.per_second_nr},
                                    {"filters_emitted", r.filters_emitted.size()}});
  say(o, "{} on {}: NR {:.2f} dB over the last {:g} s ({:.2f} s wall)\n", h.label, noise.name, nr,
      c.eval.window_s, r.wall_time_s);
  return 0;
}

int compare(const Options& o) {
  const auto c = resolve(o);
  const auto scene = load_scene(o, c);
  std::vector<eval::ControllerHandle> controllers{adaptive(c),
                                                  eval::ControllerHandle::zero(c.model.filter_length())};
  for (const auto& p : o.checkpoints) controllers.push_back(network(p, c));
  auto noises = eval::synthetic_band_cases(eval_bands(c), c.eval.duration_s, c.scene.sample_rate_hz,
                                           c.eval_rng());
  for (const auto& w : o.wavs) {
    dsp::Signal s = eval::read_wav(w);
    if (o.loop && s.duration_s() < c.eval.duration_s) {
      std::vector<double> v;
      const auto n = static_cast<std::size_t>(std::llround(c.eval.duration_s * s.sample_rate_hz()));
      for (std::size_t i = 0; i < n; ++i) v.push_back(s[i % s.size()]);
      s = dsp::Signal(std::move(v), s.sample_rate_hz());
    }
    noises.push_back({fs::path(w).stem().string(), "real", std::move(s)});
  }
  const auto table = eval::compare_table(controllers, noises, scene, c.eval.duration_s, c.eval.window_s);
  const fs::path dir = prepare(o, c);
  {
    auto out = open_out(dir / "compare.csv");
    eval::write_compare_csv(out, table);
  }
  {
    auto out = open_out(dir / "table.csv");
    eval::write_compare_wide_csv(out, table);
  }
  if (!o.quiet) {
    fmt::print("{:<14}", "noise");
    for (const auto& name : table.controllers) fmt::print("{:>14}", name);
    fmt::print("\n");
    for (std::size_t r = 0; r < table.noises.size(); ++r) {
      fmt::print("{:<14}", table.noises[r].first);
      for (std::size_t k = 0; k < table.controllers.size(); ++k) {
        const auto& cell = table.at(r, k);
        fmt::print("{:>14}", cell.ok ? fmt::format("{:.2f}", cell.nr_db) : "ERR");
      }
      fmt::print("\n");
    }
  }
  for (const auto& cell : table.cells) {
    if (!cell.ok) fmt::print(stderr, "warning: {} on {}: {}\n", cell.controller, cell.noise, cell.error);
  }
  return 0;
}

int fxnlms(const Options& o) {
  const auto c = resolve(o);
  const auto scene = load_scene(o, c);
  const auto noise = single_noise(o, c, c.eval.duration_s);
  const auto r = eval::run_sim(adaptive(c), noise.signal, scene, c.eval.duration_s, o.loop);
  const double nr = eval::nr_db(r, c.eval.window_s);
  const dsp::Signal& x = noise.signal;
  const auto wiener = eval::run_sim(
      eval::ControllerHandle::fixed(fxnlms::wiener_oracle(r.d.size() == x.size() ? x : x.slice(0, r.d.size()),
                                                          scene, c.eval.fxnlms.filter_len)),
      x, scene, c.eval.duration_s, o.loop);
  const double nr_wiener = eval::nr_db(wiener, c.eval.window_s);
  const fs::path dir = prepare(o, c);
  write_run(dir, r, c.eval.nmse_window_s);
  if (c.eval.fxnlms.trace_stride > 0) {
    const auto full = fxnlms::fxnlms_run(r.d.size() == x.size() ? x : x.slice(0, r.d.size()), scene,
                                         c.eval.fxnlms);
    auto out = open_out(dir / "trace.csv");
    fxnlms::write_trace_csv(out, full.w_trace);
  }
  write_json(dir / "summary.json", {{"noise", noise.name},
                                    {"mu", c.eval.fxnlms.mu},
                                    {"normalized", c.eval.fxnlms.normalized},
                                    {"nr_db", nr},
                                    {"wiener_nr_db", nr_wiener},
                                    {"per_second_nr", r.per_second_nr}});
  say(o, "fxnlms (mu {:g}) on {}: NR {:.2f} dB, Wiener optimum {:.2f} dB\n", c.eval.fxnlms.mu,
      noise.name, nr, nr_wiener);
  return 0;
}

int verify(const Options& o) {
  const auto c = resolve(o);
  const auto report = verify::run_verify([&](const verify::CheckResult& r) {
    say(o, "[{}] {:<24} {} ({:.2f} s)\n", r.passed ? "PASS" : "FAIL", r.name, r.detail, r.seconds);
  });
  if (!o.out.empty()) {
    const fs::path dir = prepare(o, c);
    json checks = json::array();
    for (const auto& r : report.checks) {
      checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    }
    write_json(dir / "verify.json",
               {{"passed", report.passed()}, {"total", report.checks.size()}, {"checks", checks}});
  }
  say(o, "{}/{} checks passed\n", report.passed(), report.checks.size());
  return report.ok() ? 0 : 3;
}

}  // namespace anclab::cli
