#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "inout/imagecore.hpp"

namespace inout {

/// Per-pixel index of the selected surface layer.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<int> values;

  [[nodiscard]] int at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }
};

/// true marks a pixel to be filled.
struct ArtifactMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  ArtifactMask() = default;
  ArtifactMask(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}

  [[nodiscard]] bool at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j] != 0; }
  void set(int i, int j, bool v) { values[static_cast<std::size_t>(i) * width + j] = v ? 1 : 0; }
  [[nodiscard]] std::size_t count() const;
};

struct SurfaceResult {
  Image2D image;
  DepthMap depth;
};

/// Picks, per pixel, the layer at which the axial profile jumps the most
/// (largest squared first difference along z, ties to the shallowest), then
/// median-filters the depth map with a (2r+1)^2 window and samples the stack
/// at the smoothed depth. Flat profiles select layer 0.
SurfaceResult extract_surface(const ImageStack& stack, int smooth_radius = 5);

/// Median filter for integer maps; border windows are clipped, even-sized
/// windows take the lower median.
DepthMap median_filter(const DepthMap& depth, int radius);

struct InpaintResult {
  Image2D image;
  int iterations = 0;
  double final_change = 0.0;
};

/// Harmonic fill of masked pixels by Jacobi iteration of 4-neighbour
/// averaging, seeded with the mean of the unmasked pixels. Stops when the
/// largest per-pixel update drops below tol or after max_iter sweeps.
InpaintResult inpaint(const Image2D& img, const ArtifactMask& mask, double tol = 1e-5,
                      int max_iter = 10000);

/// Mask of pixels at or above the given percentile of a calibration frame
/// that isolates the interference dot. A flat frame yields an empty mask.
ArtifactMask mask_from_calibration(const Image2D& calibration, double pct = 99.9);

ArtifactMask load_mask(const std::filesystem::path& path);
void save_mask(const ArtifactMask& mask, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset bookkeeping

struct SampleRef {
  std::string patient_id;
  std::size_t index = 0;  ///< position in the corpus the split was built from
};

struct DatasetSplit {
  std::vector<SampleRef> train;
  std::vector<SampleRef> test;
  std::set<std::string> train_patients;
  std::set<std::string> test_patients;
};

/// Patient-level split: every sample of a test patient goes to the test side.
DatasetSplit build_dataset(const std::vector<std::string>& sample_patients,
                           const std::vector<std::string>& test_patients);

/// One line of a dataset manifest (JSON Lines). Paths are relative to the
/// manifest's directory. Optional channels are empty when absent.
struct ManifestEntry {
  std::string id;
  std::string patient;
  std::string rcm;
  std::string h;
  std::string e;
  std::string rgb;
  std::string mask;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Drops entries whose id is listed (one id per line, '#' comments) in the
/// exclusion file.
std::vector<ManifestEntry> apply_exclusions(const std::vector<ManifestEntry>& entries,
                                            const std::filesystem::path& exclusion_file);

}  // namespace inout
