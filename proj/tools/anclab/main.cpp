#include <cstdio>
#include <exception>
#include <functional>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "anclab/error.hpp"
#include "anclab/parallel.hpp"
#include "anclab/version.hpp"
#include "commands.hpp"

namespace {

void common(CLI::App* cmd, anclab::cli::Options& o, bool needs_out) {
  cmd->add_option("--config", o.config, "JSON config; omitted sections keep their defaults")
      ->check(CLI::ExistingFile);
  auto* out = cmd->add_option("--out", o.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--threads", o.threads, "worker cap (default: ANCLAB_THREADS or all cores)");
  cmd->add_flag("--quiet", o.quiet, "only print errors");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = anclab::cli;
  CLI::App app{"Neural control-filter generation for active noise control"};
  app.set_version_flag("--version", anclab::kVersion);
  app.require_subcommand(1);
  cli::Options o;
  std::map<CLI::App*, std::function<int(const cli::Options&)>> run;

  auto* scene = app.add_subcommand("gen-scene", "synthesize the acoustic scene");
  common(scene, o, true);
  run[scene] = cli::gen_scene;

  auto* data = app.add_subcommand("gen-data", "write the dataset manifest and sample WAVs");
  common(data, o, true);
  data->add_option("--max-files", o.max_files, "WAV files per split (0 writes all)");
  run[data] = cli::gen_data;

  auto* train = app.add_subcommand("train", "train a co-processor");
  common(train, o, true);
  train->add_option("--scene", o.scene, "scene checkpoint from gen-scene")->check(CLI::ExistingFile);
  train->add_option("--epochs", o.epochs, "override train.epochs");
  train->add_option("--save-every", o.save_every, "also checkpoint every k epochs");
  run[train] = cli::train;

  auto* evaluate = app.add_subcommand("evaluate", "run one controller through the two-rate harness");
  evaluate->alias("run-sim");
  common(evaluate, o, true);
  evaluate->add_option("--scene", o.scene, "scene checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--checkpoint", o.checkpoints, "model checkpoint")->check(CLI::ExistingFile);
  evaluate->add_option("--controller", o.controller, "model, fxnlms, zero or wiener")
      ->check(CLI::IsMember({"model", "fxnlms", "zero", "wiener"}));
  evaluate->add_option("--noise", o.noise, "13 kHz mono WAV")->check(CLI::ExistingFile);
  evaluate->add_option("--band", o.band, "synthetic band LOW-HIGH in Hz");
  evaluate->add_option("--switch", o.switch_seconds,
                       "noise-switch scenario over the eval bands, seconds per segment");
  evaluate->add_flag("--loop", o.loop, "repeat a short noise");
  run[evaluate] = cli::evaluate;

  auto* compare = app.add_subcommand("compare", "noise-reduction table over controllers and noises");
  common(compare, o, true);
  compare->add_option("--scene", o.scene, "scene checkpoint")->check(CLI::ExistingFile);
  compare->add_option("--checkpoint", o.checkpoints, "model checkpoints (repeatable)")
      ->check(CLI::ExistingFile);
  compare->add_option("--wav", o.wavs, "extra noises as 13 kHz WAVs (repeatable)")
      ->check(CLI::ExistingFile);
  compare->add_flag("--loop", o.loop, "repeat short WAV noises");
  run[compare] = cli::compare;

  auto* fx = app.add_subcommand("fxnlms", "run the FxNLMS baseline");
  common(fx, o, true);
  fx->add_option("--scene", o.scene, "scene checkpoint")->check(CLI::ExistingFile);
  fx->add_option("--noise", o.noise, "13 kHz mono WAV")->check(CLI::ExistingFile);
  fx->add_option("--band", o.band, "synthetic band LOW-HIGH in Hz");
  fx->add_flag("--loop", o.loop, "repeat a short noise");
  run[fx] = cli::fxnlms;

  auto* verify = app.add_subcommand("verify", "run the built-in property suite");
  common(verify, o, false);
  run[verify] = cli::verify;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (o.threads > 0) anclab::set_thread_count(o.threads);
    for (auto* sub : app.get_subcommands()) return run.at(sub)(o);
  } catch (const anclab::ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
