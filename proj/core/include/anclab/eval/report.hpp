#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/signal.hpp"
#include "anclab/eval/harness.hpp"

namespace anclab::eval {

struct NoiseCase {
  std::string name;
  std::string category;
  dsp::Signal signal;
};

struct CompareCell {
  std::string noise;
  std::string controller;
  double nr_db = 0.0;
  // false when the run threw; written as "ERR".
  bool ok = true;
  std::string error;
};

struct CompareTable {
  std::vector<std::string> controllers;
  // (noise, category) in row order.
  std::vector<std::pair<std::string, std::string>> noises;
  std::vector<CompareCell> cells;  // row-major: noise, then controller
  double duration_s = 0.0;
  double window_s = 0.0;

  const CompareCell& at(std::size_t noise, std::size_t controller) const;
};

// Every (noise, controller) cell is nr_db over the last window_s of a
// duration_s run. Cells run in parallel and are stored in row-major order.
CompareTable compare_table(const std::vector<ControllerHandle>& controllers,
                           const std::vector<NoiseCase>& noises,
                           const acoustics::AcousticScene& scene, double duration_s,
                           double window_s = 1.0);

// Long form, header "noise,controller,nr_db,duration_s,window_s". Values are
// written with 17 significant digits so they parse back exactly.
void write_compare_csv(std::ostream& out, const CompareTable& table);
// Reads the long form back. Category information is not part of the format.
CompareTable read_compare_csv(std::istream& in);

// Wide form: "category,noise,<controllers...>,best", one row per noise, then
// one "<category>,average,..." row per category with arithmetic means.
void write_compare_wide_csv(std::ostream& out, const CompareTable& table);

// Two-column "t,value" file.
void write_plot_data(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& points);

// "t,d,y,e" per sample.
void write_run_csv(std::ostream& out, const RunResult& result);

// Unit-RMS band-limited noise cases named "<low>-<high>Hz", category
// "synthetic". Case i draws from derive(rng, i).
std::vector<NoiseCase> synthetic_band_cases(const std::vector<std::pair<double, double>>& bands,
                                            double duration_s, double sample_rate_hz,
                                            dsp::RngSpec rng);

std::string band_label(double low_hz, double high_hz);
std::string format_double(double v);

}  // namespace anclab::eval
