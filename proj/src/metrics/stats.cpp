#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"

namespace inout {

PairedTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y, const std::string& metric) {
  if (x.size() != y.size()) throw InvalidArgument("paired samples differ in length");
  if (x.size() < 2) throw InvalidArgument("paired t-test needs at least two pairs");
  PairedTestResult r;
  r.metric = metric;
  r.n = x.size();
  const double n = static_cast<double>(r.n);
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += x[i] - y[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i] - mean;
    ss += d * d;
  }
  r.mean_difference = mean;
  r.sd_difference = std::sqrt(ss / (n - 1.0));
  // A constant shift leaves rounding residue of order eps * |mean|.
  if (r.sd_difference <= 1e-12 * std::max(1.0, std::abs(mean)) || !std::isfinite(r.sd_difference)) {
    r.degenerate = true;
    return r;
  }
  const double t = mean / (r.sd_difference / std::sqrt(n));
  const double dof = n - 1.0;
  r.t = t;
  r.p = boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t * t));
  return r;
}

}  // namespace inout
