#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace anclab::cli {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  bool quiet = false;

  std::string scene;
  std::vector<std::string> checkpoints;
  std::optional<std::size_t> epochs;
  std::size_t save_every = 0;
  std::size_t max_files = 0;

  std::string controller;
  std::string noise;
  std::string band;
  std::vector<std::string> wavs;
  double switch_seconds = 0.0;
  bool loop = false;
};

int gen_scene(const Options& o);
int gen_data(const Options& o);
int train(const Options& o);
int evaluate(const Options& o);
int compare(const Options& o);
int fxnlms(const Options& o);
int verify(const Options& o);

}  // namespace anclab::cli
