#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace anclab::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  std::size_t passed() const;
  bool ok() const { return passed() == checks.size(); }
};

// Self-checks of the library: per-layer and end-to-end gradient checks,
// the filter-gradient oracle, the sub-filter partition identity, parameter
// counts, shape and FLOP accounting, serialization round trips and harness
// consistency. An exception inside a check counts as a failure.
VerifyReport run_verify(const std::function<void(const CheckResult&)>& on_check = {});

}  // namespace anclab::verify
