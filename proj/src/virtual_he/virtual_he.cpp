#include <algorithm>
#include <cmath>

#include "inout/errors.hpp"
#include "inout/virtual_he.hpp"

namespace inout {
namespace {

double dot(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

void StainCoefficients::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!(k_h[c] >= 0.0) || !(k_e[c] >= 0.0)) {
      throw InvalidArgument("stain coefficients must be non-negative");
    }
  }
  const double hh = dot(k_h, k_h);
  const double ee = dot(k_e, k_e);
  const double he = dot(k_h, k_e);
  // Gram determinant relative to the norms: zero iff the vectors are parallel.
  if (hh * ee - he * he <= 1e-12 * hh * ee || hh == 0.0 || ee == 0.0) {
    throw InvalidArgument("stain vectors are parallel or zero; unmixing is ill-posed");
  }
}

RgbImage beer_lambert_he(const Image2D& nuclei, const Image2D& cyto, const StainCoefficients& coeffs) {
  if (!nuclei.same_shape(cyto)) throw InvalidArgument("nuclei and cytoplasm channels differ in size");
  RgbImage out(nuclei.height, nuclei.width);
  for (int c = 0; c < 3; ++c) {
    auto dst = out.channel(c);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = std::exp(-(coeffs.k_h[c] * nuclei.values[k] + coeffs.k_e[c] * cyto.values[k]));
    }
  }
  return out;
}

StainConcentrations unmix_pixel(const std::array<double, 3>& od, const StainCoefficients& coeffs) {
  const double hh = dot(coeffs.k_h, coeffs.k_h);
  const double ee = dot(coeffs.k_e, coeffs.k_e);
  const double he = dot(coeffs.k_h, coeffs.k_e);
  const double oh = dot(od, coeffs.k_h);
  const double oe = dot(od, coeffs.k_e);
  const double det = hh * ee - he * he;

  StainConcentrations s{(oh * ee - oe * he) / det, (oe * hh - oh * he) / det};
  if (s.h >= 0.0 && s.e >= 0.0) return s;

  // Unconstrained optimum lies outside the quadrant: the constrained optimum
  // sits on one of the two boundary rays. Compare their residuals.
  const StainConcentrations only_h{std::max(0.0, oh / hh), 0.0};
  const StainConcentrations only_e{0.0, std::max(0.0, oe / ee)};
  auto residual = [&](const StainConcentrations& c) {
    double r = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = od[k] - c.h * coeffs.k_h[k] - c.e * coeffs.k_e[k];
      r += d * d;
    }
    return r;
  };
  return residual(only_h) <= residual(only_e) ? only_h : only_e;
}

Decomposition decompose_he(const RgbImage& rgb, const StainCoefficients& coeffs, double floor) {
  coeffs.validate();
  if (!(floor > 0.0)) throw InvalidArgument("optical-density floor must be positive");
  Decomposition d{Image2D(rgb.height, rgb.width), Image2D(rgb.height, rgb.width), 0};
  for (std::size_t k = 0; k < rgb.plane_size(); ++k) {
    std::array<double, 3> od{};
    bool clamped = false;
    for (int c = 0; c < 3; ++c) {
      double v = rgb.channel(c)[k];
      if (v < floor) {
        v = floor;
        clamped = true;
      }
      od[c] = -std::log(v);
    }
    d.clamped_pixels += clamped;
    const auto s = unmix_pixel(od, coeffs);
    d.h.values[k] = s.h;
    d.e.values[k] = s.e;
  }
  return d;
}

}  // namespace inout
