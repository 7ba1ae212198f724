#include <algorithm>

#include "inout/errors.hpp"
#include "inout/preprocess.hpp"

namespace inout {

DepthMap median_filter(const DepthMap& depth, int radius) {
  if (radius <= 0) return depth;
  DepthMap out = depth;
  std::vector<int> window;
  window.reserve(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1));
  for (int i = 0; i < depth.height; ++i) {
    for (int j = 0; j < depth.width; ++j) {
      window.clear();
      for (int di = std::max(0, i - radius); di <= std::min(depth.height - 1, i + radius); ++di) {
        for (int dj = std::max(0, j - radius); dj <= std::min(depth.width - 1, j + radius); ++dj) {
          window.push_back(depth.at(di, dj));
        }
      }
      auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.values[static_cast<std::size_t>(i) * depth.width + j] = *mid;
    }
  }
  return out;
}

SurfaceResult extract_surface(const ImageStack& stack, int smooth_radius) {
  stack.validate();
  const int h = stack.height();
  const int w = stack.width();
  const int d = stack.depth();

  DepthMap raw{h, w, std::vector<int>(static_cast<std::size_t>(h) * w, 0)};
  for (std::size_t k = 0; k < raw.values.size(); ++k) {
    double best = 0.0;
    int best_z = 0;
    for (int z = 1; z < d; ++z) {
      const double diff = stack.layers[z].values[k] - stack.layers[z - 1].values[k];
      const double energy = diff * diff;
      if (energy > best) {
        best = energy;
        best_z = z;
      }
    }
    raw.values[k] = best_z;
  }

  SurfaceResult r;
  r.depth = median_filter(raw, smooth_radius);
  r.image = Image2D(h, w, 0.0, stack.layers.front().bit_depth);
  for (std::size_t k = 0; k < r.depth.values.size(); ++k) {
    r.image.values[k] = stack.layers[r.depth.values[k]].values[k];
  }
  return r;
}

}  // namespace inout
