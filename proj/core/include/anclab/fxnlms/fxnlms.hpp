#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "anclab/acoustics/scene.hpp"
#include "anclab/dsp/fir.hpp"
#include "anclab/dsp/signal.hpp"

namespace anclab::fxnlms {

struct FxnlmsOptions {
  double mu = 0.001;
  std::size_t filter_len = 512;
  double eps = 1e-8;
  // false selects the raw FxLMS update w += mu e x'.
  bool normalized = true;
  // Snapshot w every `trace_stride` samples; 0 disables the trace.
  std::size_t trace_stride = 0;
};

struct WeightSnapshot {
  std::size_t sample_index = 0;
  std::vector<double> w;
};

struct FxnlmsResult {
  dsp::Signal d;
  dsp::Signal y;
  dsp::Signal e;
  dsp::FirFilter w_final;
  std::vector<WeightSnapshot> w_trace;
};

// Sample-wise filtered-x NLMS. The control output u = w^T x passes through
// the true secondary path S; the update regressor is x' = x * S_hat.
// Throws "diverged at sample n" when any weight becomes non-finite.
FxnlmsResult fxnlms_run(const dsp::Signal& x, const acoustics::AcousticScene& scene,
                        const FxnlmsOptions& options);

// CSV rows "sample_index,tap_index,value".
void write_trace_csv(std::ostream& out, const std::vector<WeightSnapshot>& trace);

}  // namespace anclab::fxnlms
