#include <algorithm>
#include <cmath>
#include <numbers>

#include "inout/errors.hpp"
#include "inout/synthgen.hpp"

namespace inout {
namespace {

/// White noise low-passed with a Gaussian whose frequency-domain width is
/// `cutoff` cycles/pixel, rescaled to [0,1].
Image2D band_limited_noise(int size, double cutoff, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image2D noise(size, size);
  for (double& v : noise.values) v = gauss(rng);
  Image2D smooth = gaussian_blur(noise, 1.0 / (2.0 * std::numbers::pi * cutoff));
  const double lo = smooth.min();
  const double hi = smooth.max();
  for (double& v : smooth.values) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return smooth;
}

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

void PhantomConfig::validate() const {
  if (image_size < 8) throw InvalidArgument("phantom image_size must be >= 8");
  if (nuclei_min < 0 || nuclei_max < nuclei_min) throw InvalidArgument("empty nuclei count range");
  if (!(radius_min > 0.0) || radius_max < radius_min) throw InvalidArgument("empty nuclei radius range");
  if (!(texture_cutoff > 0.0) || !(envelope_cutoff > 0.0)) throw InvalidArgument("cutoffs must be positive");
  if (rcm_mix_nuclei < 0.0 || rcm_mix_cyto < 0.0 || rcm_mix_nuclei + rcm_mix_cyto <= 0.0) {
    throw InvalidArgument("rcm mix weights must be non-negative with a positive sum");
  }
  if (speckle_strength < 0.0 || speckle_strength > 1.0) throw InvalidArgument("speckle_strength outside [0,1]");
  if (!(speckle_shape > 0.0)) throw InvalidArgument("speckle_shape must be positive");
}

PairedSample generate_phantom(const PhantomConfig& config, const StainCoefficients& coeffs) {
  config.validate();
  const int n = config.image_size;
  Rng rng(config.seed.value);

  // Tissue envelope and cytoplasm texture.
  Image2D envelope = band_limited_noise(n, config.envelope_cutoff, rng);
  for (double& v : envelope.values) v = 1.0 / (1.0 + std::exp(-(v - 0.35) / 0.05));
  Image2D texture = band_limited_noise(n, config.texture_cutoff, rng);

  Image2D nuclei(n, n, 0.0);
  std::uniform_int_distribution<int> count_dist(config.nuclei_min, config.nuclei_max);
  std::uniform_real_distribution<double> pos(0.0, static_cast<double>(n));
  std::uniform_real_distribution<double> radius(config.radius_min, config.radius_max);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::uniform_real_distribution<double> stain(0.7, 1.0);
  const int count = count_dist(rng);
  for (int k = 0; k < count; ++k) {
    const double cx = pos(rng), cy = pos(rng);
    const double a = radius(rng), b = radius(rng);
    const double th = angle(rng);
    const double level = stain(rng);
    const double ct = std::cos(th), st = std::sin(th);
    const double edge = std::min(a, b);
    const int reach = static_cast<int>(std::ceil(std::max(a, b))) + 2;
    for (int i = std::max(0, static_cast<int>(cy) - reach); i < std::min(n, static_cast<int>(cy) + reach + 1); ++i) {
      for (int j = std::max(0, static_cast<int>(cx) - reach); j < std::min(n, static_cast<int>(cx) + reach + 1); ++j) {
        const double dx = j + 0.5 - cx, dy = i + 0.5 - cy;
        const double u = (dx * ct + dy * st) / a;
        const double v = (-dx * st + dy * ct) / b;
        // Approximate signed distance to the rim in pixels; linear ramp over one pixel.
        const double cover = std::clamp((1.0 - std::sqrt(u * u + v * v)) * edge + 0.5, 0.0, 1.0);
        nuclei.at(i, j) = std::max(nuclei.at(i, j), cover * level);
      }
    }
  }

  Image2D cyto(n, n);
  for (std::size_t k = 0; k < cyto.size(); ++k) {
    cyto.values[k] = envelope.values[k] * (0.25 + 0.75 * texture.values[k]) * (1.0 - nuclei.values[k]);
  }

  Image2D mix(n, n);
  for (std::size_t k = 0; k < mix.size(); ++k) {
    mix.values[k] = config.rcm_mix_nuclei * nuclei.values[k] + config.rcm_mix_cyto * cyto.values[k];
  }
  Image2D rcm = normalize(mix, 0.0, 99.5).image;

  if (config.speckle_strength > 0.0) {
    std::gamma_distribution<double> speckle(config.speckle_shape, 1.0 / config.speckle_shape);
    for (double& v : rcm.values) {
      const double g = 1.0 + config.speckle_strength * (speckle(rng) - 1.0);
      v = std::clamp(v * g, 0.0, 1.0);
    }
  }
  for (double& v : rcm.values) v *= kRcmTissueCeiling;

  PairedSample s;
  if (config.artifact_enabled) {
    // Saturated dot covering ~0.2% of the frame, brighter than any tissue pixel.
    const double r = std::max(1.5, std::sqrt(0.002 * n * n / std::numbers::pi));
    std::uniform_real_distribution<double> centre(r + 1.0, n - r - 1.0);
    const double cy = centre(rng), cx = centre(rng);
    ArtifactMask mask(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double d2 = (i + 0.5 - cy) * (i + 0.5 - cy) + (j + 0.5 - cx) * (j + 0.5 - cx);
        if (d2 <= r * r) {
          mask.set(i, j, true);
          rcm.at(i, j) = 0.9 + 0.1 * std::exp(-d2 / (r * r));
        }
      }
    }
    s.artifact = std::move(mask);
  }

  s.rcm = std::move(rcm);
  s.h_target = std::move(nuclei);
  s.e_target = std::move(cyto);
  s.rgb_target = beer_lambert_he(s.h_target, s.e_target, coeffs);
  return s;
}

std::vector<PairedSample> generate_corpus(const PhantomConfig& config,
                                          const std::vector<int>& images_per_patient,
                                          const StainCoefficients& coeffs) {
  if (images_per_patient.empty()) throw InvalidArgument("corpus needs at least one patient");
  std::vector<PairedSample> corpus;
  const int pad = std::max(2, static_cast<int>(std::to_string(images_per_patient.size()).size()));
  for (std::size_t p = 0; p < images_per_patient.size(); ++p) {
    if (images_per_patient[p] < 0) throw InvalidArgument("negative image count");
    const RngSeed patient_seed = derive_seed(config.seed, "patient", p);
    const std::string pid = "P" + zero_pad(static_cast<int>(p) + 1, pad);
    for (int i = 0; i < images_per_patient[p]; ++i) {
      PhantomConfig c = config;
      c.seed = derive_seed(patient_seed, "image", static_cast<std::uint64_t>(i));
      PairedSample s = generate_phantom(c, coeffs);
      s.patient_id = pid;
      s.id = pid + "_" + zero_pad(i, 4);
      corpus.push_back(std::move(s));
    }
  }
  return corpus;
}

std::vector<PairedSample> generate_corpus(const PhantomConfig& config, int patients,
                                          int images_per_patient, const StainCoefficients& coeffs) {
  if (patients < 1) throw InvalidArgument("patients must be >= 1");
  return generate_corpus(config, std::vector<int>(static_cast<std::size_t>(patients), images_per_patient),
                         coeffs);
}

}  // namespace inout
