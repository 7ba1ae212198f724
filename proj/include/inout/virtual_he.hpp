#pragma once

#include <array>

#include "inout/imagecore.hpp"

namespace inout {

/// Per-channel (R, G, B) absorption coefficients of the two stains.
struct StainCoefficients {
  std::array<double, 3> k_h{0.60, 1.45, 0.80};
  std::array<double, 3> k_e{0.10, 1.00, 0.55};

  /// Throws InvalidArgument on negative entries or parallel stain vectors.
  void validate() const;
};

/// out(c) = exp(-(k_h[c] * nuclei + k_e[c] * cyto)) per pixel.
RgbImage beer_lambert_he(const Image2D& nuclei, const Image2D& cyto,
                         const StainCoefficients& coeffs = {});

struct StainConcentrations {
  double h = 0.0;
  double e = 0.0;
};

/// Non-negative least-squares fit of od ~ h*k_h + e*k_e for one pixel.
StainConcentrations unmix_pixel(const std::array<double, 3>& od, const StainCoefficients& coeffs);

struct Decomposition {
  Image2D h;
  Image2D e;
  std::size_t clamped_pixels = 0;  ///< pixels with a channel below the floor
};

/// Optical density od = -ln(max(rgb, floor)) followed by per-pixel
/// non-negative unmixing.
Decomposition decompose_he(const RgbImage& rgb, const StainCoefficients& coeffs = {},
                           double floor = 1e-4);

}  // namespace inout
