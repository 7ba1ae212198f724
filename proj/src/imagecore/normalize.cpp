#include <algorithm>
#include <cmath>

#include "inout/errors.hpp"
#include "inout/imagecore.hpp"

namespace inout {

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw InvalidArgument("percentile of empty set");
  if (!(pct >= 0.0 && pct <= 100.0)) throw InvalidArgument("percentile outside [0,100]");
  std::vector<double> v(values.begin(), values.end());
  const double rank = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  if (hi == lo) return a;
  // The (lo+1)-th order statistic is the minimum of the upper partition.
  const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (rank - static_cast<double>(lo)) * (b - a);
}

NormalizeResult normalize(const Image2D& img, double lo_pct, double hi_pct) {
  if (!(lo_pct >= 0.0 && lo_pct < hi_pct && hi_pct <= 100.0)) {
    throw InvalidArgument("normalize requires 0 <= lo_pct < hi_pct <= 100");
  }
  NormalizeResult r;
  r.image = Image2D(img.height, img.width, 0.0, 0);
  const double lo = percentile(img.values, lo_pct);
  const double hi = percentile(img.values, hi_pct);
  if (!(hi > lo)) {
    r.degenerate = true;
    return r;
  }
  const double scale = 1.0 / (hi - lo);
  for (std::size_t k = 0; k < img.values.size(); ++k) {
    r.image.values[k] = std::clamp((img.values[k] - lo) * scale, 0.0, 1.0);
  }
  return r;
}

}  // namespace inout
