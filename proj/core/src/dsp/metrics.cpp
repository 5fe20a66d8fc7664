#include "anclab/dsp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "anclab/error.hpp"

namespace anclab::dsp {

double power_db_ratio(std::span<const double> num, std::span<const double> den) {
  if (num.empty() || num.size() != den.size()) throw Error("empty interval");
  const double pn = energy(num);
  const double pd = energy(den);
  if (pd == 0.0) return pn == 0.0 ? 0.0 : kDbClamp;
  if (pn == 0.0) return -kDbClamp;
  return std::clamp(10.0 * std::log10(pn / pd), -kDbClamp, kDbClamp);
}

double power_db_ratio(const Signal& num, const Signal& den, SampleRange range) {
  if (range.size() == 0) throw Error("empty interval");
  if (range.end > num.size() || range.end > den.size()) throw Error("interval outside signal");
  return power_db_ratio(num.samples().subspan(range.begin, range.size()),
                        den.samples().subspan(range.begin, range.size()));
}

}  // namespace anclab::dsp
