#include <cmath>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"

namespace inout {

namespace {

void require_same(int h1, int w1, int h2, int w2) {
  if (h1 != h2 || w1 != w2) throw InvalidArgument("metric inputs differ in size");
  if (h1 < 1 || w1 < 1) throw InvalidArgument("metric inputs are empty");
}

double mean_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = kPixelMax * (a[k] - b[k]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

double mse(const RgbImage& a, const RgbImage& b) {
  require_same(a.height, a.width, b.height, b.width);
  return mean_sq_diff(a.values, b.values);
}

double mse(const Image2D& a, const Image2D& b) {
  require_same(a.height, a.width, b.height, b.width);
  return mean_sq_diff(a.values, b.values);
}

double psnr_from_mse(double mse_value, double max_value) {
  if (mse_value < 0.0) throw InvalidArgument("negative mse");
  if (mse_value == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(max_value * max_value / mse_value);
}

double psnr(const RgbImage& a, const RgbImage& b, double max_value) { return psnr_from_mse(mse(a, b), max_value); }

Image2D luma255(const RgbImage& img) { return scaled255(img.luminance()); }

Image2D scaled255(const Image2D& img) {
  Image2D out = img;
  for (auto& v : out.values) v *= kPixelMax;
  return out;
}

double vol(const Image2D& img) {
  if (img.height < 3 || img.width < 3) throw InvalidArgument("VOL needs at least 3x3 pixels");
  const std::size_t n = static_cast<std::size_t>(img.height - 2) * (img.width - 2);
  std::vector<double> r;
  r.reserve(n);
  for (int i = 1; i + 1 < img.height; ++i)
    for (int j = 1; j + 1 < img.width; ++j)
      r.push_back(img.at(i - 1, j) + img.at(i + 1, j) + img.at(i, j - 1) + img.at(i, j + 1) - 4.0 * img.at(i, j));
  double mean = 0.0;
  for (double v : r) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  return var / static_cast<double>(n);
}

double vol(const RgbImage& img) { return vol(luma255(img)); }

}  // namespace inout
