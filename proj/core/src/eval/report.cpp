#include "anclab/eval/report.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "anclab/dsp/noise.hpp"
#include "anclab/error.hpp"
#include "anclab/parallel.hpp"

namespace anclab::eval {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw Error("bad number '" + s + "'");
  return v;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

std::string band_label(double low_hz, double high_hz) {
  return fmt::format("{:g}-{:g}Hz", low_hz, high_hz);
}

std::vector<NoiseCase> synthetic_band_cases(const std::vector<std::pair<double, double>>& bands,
                                            double duration_s, double sample_rate_hz,
                                            dsp::RngSpec rng) {
  std::vector<NoiseCase> out;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto [lo, hi] = bands[i];
    out.push_back({band_label(lo, hi), "synthetic",
                   dsp::generate_bandlimited_noise(lo, hi, duration_s, sample_rate_hz,
                                                   dsp::derive(rng, i))});
  }
  return out;
}

const CompareCell& CompareTable::at(std::size_t noise, std::size_t controller) const {
  return cells.at(noise * controllers.size() + controller);
}

CompareTable compare_table(const std::vector<ControllerHandle>& controllers,
                           const std::vector<NoiseCase>& noises,
                           const acoustics::AcousticScene& scene, double duration_s,
                           double window_s) {
  CompareTable t;
  t.duration_s = duration_s;
  t.window_s = window_s;
  for (const auto& c : controllers) t.controllers.push_back(c.label);
  for (const auto& n : noises) t.noises.emplace_back(n.name, n.category);
  t.cells.resize(noises.size() * controllers.size());
  parallel_for(t.cells.size(), [&](std::size_t i) {
    const std::size_t row = i / controllers.size();
    const std::size_t col = i % controllers.size();
    CompareCell& cell = t.cells[i];
    cell.noise = noises[row].name;
    cell.controller = controllers[col].label;
    try {
      const RunResult r = run_sim(controllers[col], noises[row].signal, scene, duration_s);
      cell.nr_db = nr_db(r, window_s);
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  });
  return t;
}

void write_compare_csv(std::ostream& out, const CompareTable& t) {
  out << "noise,controller,nr_db,duration_s,window_s\n";
  for (const auto& c : t.cells) {
    out << c.noise << ',' << c.controller << ',' << (c.ok ? format_double(c.nr_db) : "ERR") << ','
        << format_double(t.duration_s) << ',' << format_double(t.window_s) << '\n';
  }
}

CompareTable read_compare_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "noise,controller,nr_db,duration_s,window_s") {
    throw Error("compare CSV: unexpected header");
  }
  CompareTable t;
  std::map<std::string, std::size_t> noise_index, controller_index;
  std::vector<CompareCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw Error("compare CSV: expected 5 fields in '" + line + "'");
    CompareCell c;
    c.noise = f[0];
    c.controller = f[1];
    if (f[2] == "ERR") {
      c.ok = false;
    } else {
      c.nr_db = parse_double(f[2]);
    }
    t.duration_s = parse_double(f[3]);
    t.window_s = parse_double(f[4]);
    if (!noise_index.count(c.noise)) {
      noise_index[c.noise] = t.noises.size();
      t.noises.emplace_back(c.noise, "");
    }
    if (!controller_index.count(c.controller)) {
      controller_index[c.controller] = t.controllers.size();
      t.controllers.push_back(c.controller);
    }
    cells.push_back(std::move(c));
  }
  t.cells.resize(t.noises.size() * t.controllers.size());
  for (auto& c : cells) {
    t.cells[noise_index[c.noise] * t.controllers.size() + controller_index[c.controller]] = std::move(c);
  }
  return t;
}

void write_compare_wide_csv(std::ostream& out, const CompareTable& t) {
  out << "category,noise";
  for (const auto& c : t.controllers) out << ',' << c;
  out << ",best\n";
  std::vector<std::string> categories;
  std::map<std::string, std::vector<std::size_t>> rows_of;
  for (std::size_t r = 0; r < t.noises.size(); ++r) {
    const std::string& cat = t.noises[r].second;
    if (!rows_of.count(cat)) categories.push_back(cat);
    rows_of[cat].push_back(r);
  }
  auto best_of = [&](const std::vector<double>& values, const std::vector<bool>& ok) {
    std::string best;
    double best_v = 0.0;
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (ok[c] && (best.empty() || values[c] > best_v)) {
        best = t.controllers[c];
        best_v = values[c];
      }
    }
    return best;
  };
  for (const auto& cat : categories) {
    const std::size_t nc = t.controllers.size();
    std::vector<double> sums(nc, 0.0);
    std::vector<std::size_t> counts(nc, 0);
    for (std::size_t r : rows_of[cat]) {
      out << cat << ',' << t.noises[r].first;
      std::vector<double> values(nc, 0.0);
      std::vector<bool> ok(nc, false);
      for (std::size_t c = 0; c < nc; ++c) {
        const CompareCell& cell = t.at(r, c);
        ok[c] = cell.ok;
        values[c] = cell.nr_db;
        out << ',' << (cell.ok ? fmt::format("{:.2f}", cell.nr_db) : "ERR");
        if (cell.ok) {
          sums[c] += cell.nr_db;
          ++counts[c];
        }
      }
      out << ',' << best_of(values, ok) << '\n';
    }
    out << cat << ",average";
    std::vector<double> means(nc, 0.0);
    std::vector<bool> ok(nc, false);
    for (std::size_t c = 0; c < nc; ++c) {
      ok[c] = counts[c] > 0;
      means[c] = ok[c] ? sums[c] / static_cast<double>(counts[c]) : 0.0;
      out << ',' << (ok[c] ? fmt::format("{:.2f}", means[c]) : "ERR");
    }
    out << ',' << best_of(means, ok) << '\n';
  }
}

void write_plot_data(const std::filesystem::path& path,
                     const std::vector<std::pair<double, double>>& points) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "t,value\n";
  for (const auto& [t, v] : points) out << format_double(t) << ',' << format_double(v) << '\n';
}

void write_run_csv(std::ostream& out, const RunResult& r) {
  out << "t,d,y,e\n";
  const double fs = r.d.sample_rate_hz();
  for (std::size_t n = 0; n < r.d.size(); ++n) {
    out << format_double(static_cast<double>(n) / fs) << ',' << format_double(r.d[n]) << ','
        << format_double(r.y[n]) << ',' << format_double(r.e[n]) << '\n';
  }
}

}  // namespace anclab::eval
