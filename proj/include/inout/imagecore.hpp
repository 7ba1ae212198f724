#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace inout {

/// Single-channel scalar field, row-major.
///
/// Values are either raw counts (bit_depth 8 or 16) or normalized reals in
/// [0,1] (bit_depth 0).
struct Image2D {
  int height = 0;
  int width = 0;
  int bit_depth = 0;
  std::vector<double> values;

  Image2D() = default;
  Image2D(int h, int w, double fill = 0.0, int depth = 0);

  [[nodiscard]] std::size_t size() const { return values.size(); }
  [[nodiscard]] double& at(int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; }
  [[nodiscard]] double at(int i, int j) const {
    return values[static_cast<std::size_t>(i) * width + j];
  }
  [[nodiscard]] bool same_shape(const Image2D& o) const {
    return height == o.height && width == o.width;
  }
  [[nodiscard]] double min() const;
  [[nodiscard]] double max() const;
};

/// Three-channel (R, G, B) image, planar storage: channel c occupies
/// values[c*H*W, (c+1)*H*W).
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  RgbImage() = default;
  RgbImage(int h, int w, double fill = 0.0);

  [[nodiscard]] std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  [[nodiscard]] double& at(int c, int i, int j) {
    return values[c * plane_size() + static_cast<std::size_t>(i) * width + j];
  }
  [[nodiscard]] double at(int c, int i, int j) const {
    return values[c * plane_size() + static_cast<std::size_t>(i) * width + j];
  }
  [[nodiscard]] std::span<double> channel(int c) {
    return {values.data() + c * plane_size(), plane_size()};
  }
  [[nodiscard]] std::span<const double> channel(int c) const {
    return {values.data() + c * plane_size(), plane_size()};
  }
  [[nodiscard]] Image2D channel_image(int c) const;
  /// Rec. 601 luma, same scale as the input.
  [[nodiscard]] Image2D luminance() const;
  [[nodiscard]] RgbImage clamped() const;
};

/// Depth-ordered (shallow to deep) co-registered layers.
struct ImageStack {
  std::vector<Image2D> layers;
  double z_step_um = 1.0;

  [[nodiscard]] int depth() const { return static_cast<int>(layers.size()); }
  [[nodiscard]] int height() const { return layers.empty() ? 0 : layers.front().height; }
  [[nodiscard]] int width() const { return layers.empty() ? 0 : layers.front().width; }
  /// Throws InvalidArgument if empty or layer shapes disagree.
  void validate() const;
};

struct RngSeed {
  std::uint64_t value = 0;
};

/// Deterministic generator used everywhere randomness is needed.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; the building block of sub-seed derivation.
std::uint64_t mix64(std::uint64_t x);

/// Sub-seed for a named purpose: mix64(master ^ fnv1a64(purpose)).
/// Stages draw from independent streams, so toggling one stage never shifts
/// another's random sequence.
RngSeed derive_seed(RngSeed master, std::string_view purpose);
RngSeed derive_seed(RngSeed master, std::string_view purpose, std::uint64_t index);

// ---------------------------------------------------------------------------
// I/O

/// Multi-page grayscale TIFF, or a directory whose image files are read in
/// lexicographic order.
ImageStack load_stack(const std::filesystem::path& path);
/// Multi-page TIFF; layers must carry bit_depth 8 or 16, or be normalized
/// (then they are written as 16-bit).
void save_stack(const ImageStack& stack, const std::filesystem::path& path);

Image2D load_image(const std::filesystem::path& path);
/// 8/16-bit by the image's bit_depth; normalized images are scaled to 16 bit.
void save_image(const Image2D& img, const std::filesystem::path& path);
/// Loads an 8-bit/16-bit colour image to [0,1] RGB.
RgbImage load_rgb(const std::filesystem::path& path);
/// Clamps to [0,1] and writes 8-bit (PNG by extension).
void save_rgb(const RgbImage& img, const std::filesystem::path& path);

/// Maps raw counts to [0,1] by the declared bit depth (no-op when already
/// normalized).
Image2D to_unit_range(const Image2D& img);

// ---------------------------------------------------------------------------
// Filtering, normalization and cropping

/// Separable Gaussian blur, kernel truncated at 4 sigma, mirrored borders.
Image2D gaussian_blur(const Image2D& img, double sigma);

struct NormalizeResult {
  Image2D image;
  bool degenerate = false;  ///< zero dynamic range; image is all zeros
};

/// Linear-interpolated percentile of the values (numpy "linear" rule).
double percentile(std::span<const double> values, double pct);

/// Maps the lo_pct percentile to 0 and hi_pct percentile to 1, clamped.
NormalizeResult normalize(const Image2D& img, double lo_pct = 1.0, double hi_pct = 99.0);

struct CropOffset {
  int row = 0;
  int col = 0;
  friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

std::vector<CropOffset> crop_offsets(int height, int width, int size, int count, Rng& rng);

Image2D crop(const Image2D& img, CropOffset at, int size);
RgbImage crop(const RgbImage& img, CropOffset at, int size);

/// One patch group per offset; every group holds the co-registered crops of
/// all inputs in order.
struct PatchGroup {
  CropOffset offset;
  std::vector<Image2D> gray;
  std::vector<RgbImage> rgb;
};

std::vector<PatchGroup> random_crop_set(const std::vector<Image2D>& gray,
                                        const std::vector<RgbImage>& rgb, int size, int count,
                                        RngSeed seed);

}  // namespace inout
