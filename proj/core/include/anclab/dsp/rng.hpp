#pragma once

#include <cstdint>

namespace anclab::dsp {

// Identifies one reproducible random stream.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

// Child stream of `base` tagged by `child`. Distinct tags give distinct,
// statistically independent streams.
RngSpec derive(RngSpec base, std::uint64_t child);

// Counter-based generator: output i is splitmix64(key + i * golden), where
// key is a hash of (seed, stream_id). Only integer arithmetic is involved in
// producing bits, so sequences are identical on every platform.
class Rng {
 public:
  explicit Rng(RngSpec spec);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via the Marsaglia polar method.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace anclab::dsp
