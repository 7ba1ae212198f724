#pragma once

#include <optional>
#include <string>
#include <vector>

#include "inout/imagecore.hpp"
#include "inout/preprocess.hpp"
#include "inout/virtual_he.hpp"

namespace inout {

struct PhantomConfig {
  int image_size = 128;
  int nuclei_min = 8;
  int nuclei_max = 20;
  double radius_min = 3.0;  ///< ellipse semi-axis range, pixels
  double radius_max = 7.0;
  double texture_cutoff = 0.08;  ///< cycles/pixel of the cytoplasm texture low-pass
  double envelope_cutoff = 0.02;
  double rcm_mix_nuclei = 1.0;
  double rcm_mix_cyto = 0.45;
  double speckle_strength = 1.0;  ///< 0 disables speckle
  double speckle_shape = 4.0;     ///< gamma shape of the unit-mean speckle
  bool artifact_enabled = true;
  RngSeed seed{0};

  void validate() const;
};

/// Pixel-aligned training record.
struct PairedSample {
  std::string id;
  std::string patient_id;
  Image2D rcm;       ///< network input, [0,1]
  Image2D h_target;  ///< nuclei concentration
  Image2D e_target;  ///< cytoplasm concentration
  RgbImage rgb_target;
  std::optional<ArtifactMask> artifact;  ///< bright-dot footprint when one was injected
};

/// Random anti-aliased ellipses (nuclei), low-pass noise under a tissue
/// envelope (cytoplasm, excluded inside nuclei), and an RCM-like input
/// a*nuclei + b*cyto that is percentile-normalized, speckled and optionally
/// carries one saturated interference dot.
PairedSample generate_phantom(const PhantomConfig& config, const StainCoefficients& coeffs = {});

/// images_per_patient images for each of `patients` patients (ids P01, P02,
/// ...). Sub-seeds: derive_seed(seed, "patient", p) then
/// derive_seed(patient_seed, "image", i).
std::vector<PairedSample> generate_corpus(const PhantomConfig& config, int patients,
                                          int images_per_patient,
                                          const StainCoefficients& coeffs = {});

/// Uneven per-patient image counts.
std::vector<PairedSample> generate_corpus(const PhantomConfig& config,
                                          const std::vector<int>& images_per_patient,
                                          const StainCoefficients& coeffs = {});

/// Intensity scale of tissue content in the RCM input; the interference dot
/// occupies the band above it.
inline constexpr double kRcmTissueCeiling = 0.85;

}  // namespace inout
