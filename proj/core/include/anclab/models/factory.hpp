#pragma once

#include <cstdint>
#include <memory>

#include "anclab/models/e2ecfg.hpp"
#include "anclab/models/gfanc.hpp"
#include "anclab/models/generator.hpp"

namespace anclab::models {

struct ModelSpec {
  ModelKind kind = ModelKind::kE2ECfg;
  E2ECfgConfig e2ecfg;
  GfancConfig gfanc;
  // GFANC sub-filter bank source.
  PretrainOptions pretrain;
  std::uint64_t seed = 1;

  std::size_t filter_length() const {
    return kind == ModelKind::kE2ECfg ? e2ecfg.filter_len : gfanc.filter_len;
  }
};

// Freshly initialized network. A GFANC model starts with an all-zero bank;
// callers install one with set_bank.
template <typename T>
std::unique_ptr<FilterGenerator<T>> make_generator(const ModelSpec& spec) {
  if (spec.kind == ModelKind::kE2ECfg) return std::make_unique<E2ECfgModel<T>>(spec.e2ecfg, spec.seed);
  return std::make_unique<GfancModel<T>>(spec.gfanc, spec.seed);
}

}  // namespace anclab::models
