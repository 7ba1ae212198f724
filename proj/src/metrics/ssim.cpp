#include <algorithm>
#include <cmath>
#include <numeric>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"

namespace inout {

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= s;
  return k;
}

/// Separable 'valid' filtering.
Image2D filter_valid(const Image2D& img, const std::vector<double>& k) {
  const int w = static_cast<int>(k.size());
  const int oh = img.height - w + 1;
  const int ow = img.width - w + 1;
  Image2D rows(img.height, ow);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * img.at(i, j + t);
      rows.at(i, j) = s;
    }
  Image2D out(oh, ow);
  for (int i = 0; i < oh; ++i)
    for (int j = 0; j < ow; ++j) {
      double s = 0.0;
      for (int t = 0; t < w; ++t) s += k[t] * rows.at(i + t, j);
      out.at(i, j) = s;
    }
  return out;
}

Image2D product(const Image2D& a, const Image2D& b) {
  Image2D out(a.height, a.width);
  for (std::size_t k = 0; k < a.size(); ++k) out.values[k] = a.values[k] * b.values[k];
  return out;
}

struct SsimParts {
  double ssim = 0.0;  ///< mean of l*cs
  double cs = 0.0;    ///< mean of cs
};

SsimParts ssim_parts(const Image2D& a, const Image2D& b, const SsimOptions& o) {
  if (!a.same_shape(b)) throw InvalidArgument("SSIM inputs differ in size");
  if (a.height < o.window || a.width < o.window)
    throw InvalidArgument("image smaller than the SSIM window");
  const auto k = gaussian_kernel(o.window, o.sigma);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const auto mu_a = filter_valid(a, k);
  const auto mu_b = filter_valid(b, k);
  const auto aa = filter_valid(product(a, a), k);
  const auto bb = filter_valid(product(b, b), k);
  const auto ab = filter_valid(product(a, b), k);
  SsimParts p;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.values[i];
    const double mb = mu_b.values[i];
    const double va = aa.values[i] - ma * ma;
    const double vb = bb.values[i] - mb * mb;
    const double cov = ab.values[i] - ma * mb;
    const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    p.ssim += l * cs;
    p.cs += cs;
  }
  p.ssim /= static_cast<double>(mu_a.size());
  p.cs /= static_cast<double>(mu_a.size());
  return p;
}

Image2D downsample2(const Image2D& img) {
  Image2D out(img.height / 2, img.width / 2);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j)
      out.at(i, j) = 0.25 * (img.at(2 * i, 2 * j) + img.at(2 * i + 1, 2 * j) + img.at(2 * i, 2 * j + 1) +
                             img.at(2 * i + 1, 2 * j + 1));
  return out;
}

}  // namespace

double ssim_gray(const Image2D& a, const Image2D& b, const SsimOptions& o) {
  if (a.values == b.values && a.same_shape(b)) {
    if (a.height < o.window || a.width < o.window) throw InvalidArgument("image smaller than the SSIM window");
    return 1.0;
  }
  return ssim_parts(a, b, o).ssim;
}

double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& o) {
  return ssim_gray(luma255(a), luma255(b), o);
}

std::vector<double> standard_ms_ssim_weights() { return {0.0448, 0.2856, 0.3001, 0.2363, 0.1333}; }

std::vector<double> truncated_ms_ssim_weights(int scales) {
  const auto w = standard_ms_ssim_weights();
  if (scales < 1 || scales > static_cast<int>(w.size())) throw InvalidArgument("MS-SSIM scale count out of range");
  std::vector<double> out(w.begin(), w.begin() + scales);
  const double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& v : out) v /= s;
  return out;
}

int max_ms_ssim_scales(int height, int width, int window, int max_scales) {
  int s = 0;
  int h = height;
  int w = width;
  while (s < max_scales && h >= window && w >= window) {
    ++s;
    h /= 2;
    w /= 2;
  }
  return s;
}

double ms_ssim_gray(const Image2D& a, const Image2D& b, const std::vector<double>& weights, const SsimOptions& o) {
  const int m = static_cast<int>(weights.size());
  if (m < 1) throw InvalidArgument("MS-SSIM needs at least one scale");
  if (!a.same_shape(b)) throw InvalidArgument("MS-SSIM inputs differ in size");
  if (max_ms_ssim_scales(a.height, a.width, o.window, m) < m)
    throw InvalidArgument("image too small for " + std::to_string(m) + " MS-SSIM scales");
  Image2D x = a;
  Image2D y = b;
  double result = 1.0;
  for (int j = 0; j < m; ++j) {
    const auto p = ssim_parts(x, y, o);
    const double term = j + 1 < m ? p.cs : p.ssim;
    result *= std::pow(std::max(term, 0.0), weights[j]);
    if (j + 1 < m) {
      x = downsample2(x);
      y = downsample2(y);
    }
  }
  return result;
}

double ms_ssim(const RgbImage& a, const RgbImage& b, const std::vector<double>& weights, const SsimOptions& o) {
  return ms_ssim_gray(luma255(a), luma255(b), weights, o);
}

double ms_ssim(const RgbImage& a, const RgbImage& b) { return ms_ssim(a, b, standard_ms_ssim_weights()); }

}  // namespace inout
