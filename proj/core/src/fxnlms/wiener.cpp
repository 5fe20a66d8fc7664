#include "anclab/fxnlms/wiener.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "anclab/acoustics/plant.hpp"
#include "anclab/error.hpp"

namespace anclab::fxnlms {

dsp::FirFilter wiener_solve(const dsp::Signal& filtered, const dsp::Signal& d,
                            std::size_t filter_len) {
  if (filter_len == 0) throw ConfigError("filter_len must be positive");
  if (filtered.size() != d.size()) throw Error("reference and disturbance lengths differ");
  if (filtered.size() < 4 * filter_len) throw ConfigError("signal shorter than 4 * filter_len");

  const std::size_t total = filtered.size();
  const auto n = static_cast<Eigen::Index>(filter_len);
  const std::span<const double> xf = filtered.samples();

  // Covariance-method normal equations, R[i][j] = sum_n xf(n-i) xf(n-j) with
  // zero pre-history. The first row is computed directly; the rest follows
  // from R[i+1][j+1] = R[i][j] - xf(T-1-i) xf(T-1-j).
  Eigen::MatrixXd r(n, n);
  Eigen::VectorXd p(n);
  for (std::size_t j = 0; j < filter_len; ++j) {
    double acc = 0.0;
    for (std::size_t t = j; t < total; ++t) acc += xf[t] * xf[t - j];
    r(0, static_cast<Eigen::Index>(j)) = acc;
    double cross = 0.0;
    for (std::size_t t = j; t < total; ++t) cross += d[t] * xf[t - j];
    p(static_cast<Eigen::Index>(j)) = cross;
  }
  for (std::size_t i = 0; i + 1 < filter_len; ++i) {
    for (std::size_t j = i; j + 1 < filter_len; ++j) {
      r(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(j + 1)) =
          r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -
          xf[total - 1 - i] * xf[total - 1 - j];
    }
  }
  r.triangularView<Eigen::StrictlyLower>() = r.transpose().triangularView<Eigen::StrictlyLower>();

  const double ridge = kWienerRidge * r.trace() / static_cast<double>(filter_len);
  if (!(ridge > 0.0)) throw Error("rank deficient");
  r.diagonal().array() += ridge;

  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) throw Error("rank deficient");
  const Eigen::VectorXd w = llt.solve(p);
  if (!w.allFinite()) throw Error("rank deficient");
  return dsp::FirFilter(std::vector<double>(w.data(), w.data() + w.size()));
}

dsp::FirFilter wiener_oracle(const dsp::Signal& x, const acoustics::AcousticScene& scene,
                             std::size_t filter_len) {
  return wiener_solve(acoustics::filtered_reference(x, scene), acoustics::disturbance(x, scene),
                      filter_len);
}

}  // namespace anclab::fxnlms
