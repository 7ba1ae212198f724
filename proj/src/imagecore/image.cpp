#include <algorithm>
#include <cmath>
#include <string_view>

#include "inout/errors.hpp"
#include "inout/imagecore.hpp"

namespace inout {

Image2D::Image2D(int h, int w, double fill, int depth)
    : height(h), width(w), bit_depth(depth) {
  if (h < 1 || w < 1) {
    throw InvalidArgument("image dimensions must be positive");
  }
  values.assign(static_cast<std::size_t>(h) * w, fill);
}

double Image2D::min() const { return *std::min_element(values.begin(), values.end()); }
double Image2D::max() const { return *std::max_element(values.begin(), values.end()); }

RgbImage::RgbImage(int h, int w, double fill) : height(h), width(w) {
  if (h < 1 || w < 1) {
    throw InvalidArgument("image dimensions must be positive");
  }
  values.assign(3 * static_cast<std::size_t>(h) * w, fill);
}

Image2D RgbImage::channel_image(int c) const {
  Image2D out(height, width);
  auto src = channel(c);
  std::copy(src.begin(), src.end(), out.values.begin());
  return out;
}

Image2D RgbImage::luminance() const {
  Image2D out(height, width);
  auto r = channel(0);
  auto g = channel(1);
  auto b = channel(2);
  for (std::size_t k = 0; k < plane_size(); ++k) {
    out.values[k] = 0.299 * r[k] + 0.587 * g[k] + 0.114 * b[k];
  }
  return out;
}

RgbImage RgbImage::clamped() const {
  RgbImage out = *this;
  for (double& v : out.values) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void ImageStack::validate() const {
  if (layers.empty()) throw InvalidArgument("image stack is empty");
  for (const auto& l : layers) {
    if (!l.same_shape(layers.front())) {
      throw InvalidArgument("stack layers have mixed dimensions: " +
                            std::to_string(layers.front().height) + "x" +
                            std::to_string(layers.front().width) + " vs " +
                            std::to_string(l.height) + "x" + std::to_string(l.width));
    }
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {
std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

RngSeed derive_seed(RngSeed master, std::string_view purpose) {
  return {mix64(master.value ^ fnv1a64(purpose))};
}

RngSeed derive_seed(RngSeed master, std::string_view purpose, std::uint64_t index) {
  return {mix64(derive_seed(master, purpose).value + mix64(index))};
}

}  // namespace inout

namespace inout {

Image2D gaussian_blur(const Image2D& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    k[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    total += k[t + radius];
  }
  for (double& v : k) v /= total;

  auto mirror = [](int x, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    x = ((x % period) + period) % period;
    return x < n ? x : period - x;
  };

  Image2D tmp(img.height, img.width, 0.0, img.bit_depth);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * img.at(i, mirror(j + t, img.width));
      tmp.at(i, j) = acc;
    }
  }
  Image2D out(img.height, img.width, 0.0, img.bit_depth);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) acc += k[t + radius] * tmp.at(mirror(i + t, img.height), j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

}  // namespace inout
