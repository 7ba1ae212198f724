#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inout/imagecore.hpp"

namespace inout {

// Every metric works on the 0-255 scale: [0,1] inputs are multiplied by 255
// before anything else. Grayscale metrics on RGB inputs use Rec. 601 luma.

inline constexpr double kPixelMax = 255.0;
/// PSNR of identical images.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

double mse(const RgbImage& a, const RgbImage& b);
double mse(const Image2D& a, const Image2D& b);
/// 10 log10(max^2 / mse), kInfinitePsnr when mse is zero. mse is on the
/// 0-255 scale.
double psnr_from_mse(double mse_value, double max_value = kPixelMax);
double psnr(const RgbImage& a, const RgbImage& b, double max_value = kPixelMax);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = kPixelMax;
};

/// Luma on the 0-255 scale.
Image2D luma255(const RgbImage& img);
/// Multiplies a [0,1] field by 255.
Image2D scaled255(const Image2D& img);

/// Mean local SSIM over the positions where the Gaussian window fits
/// entirely inside the image. Inputs are already on the metric scale.
double ssim_gray(const Image2D& a, const Image2D& b, const SsimOptions& o = {});
double ssim(const RgbImage& a, const RgbImage& b, const SsimOptions& o = {});

/// The five-scale weight vector of the multi-scale index.
std::vector<double> standard_ms_ssim_weights();
/// First `scales` standard weights rescaled to sum to one.
std::vector<double> truncated_ms_ssim_weights(int scales);
/// Largest dyadic scale count (at most max_scales) the image supports.
int max_ms_ssim_scales(int height, int width, int window = 11, int max_scales = 5);

/// prod_j cs_j^w_j * l_M^w_M with 2x2 average pooling between scales;
/// negative contrast-structure terms are clamped to zero.
double ms_ssim_gray(const Image2D& a, const Image2D& b, const std::vector<double>& weights,
                    const SsimOptions& o = {});
double ms_ssim(const RgbImage& a, const RgbImage& b, const std::vector<double>& weights,
               const SsimOptions& o = {});
double ms_ssim(const RgbImage& a, const RgbImage& b);

struct FsimOptions {
  int scales = 4;
  int orientations = 4;
  double min_wavelength = 6.0;
  double mult = 2.0;
  double sigma_onf = 0.55;
  double d_theta_on_sigma = 1.2;
  double k = 2.0;
  double epsilon = 1e-4;
  double t1 = 0.85;
  double t2 = 160.0;
};

/// Phase congruency map of a grayscale field (log-Gabor bank with noise
/// compensation).
Image2D phase_congruency(const Image2D& img, const FsimOptions& o = {});
double fsim_gray(const Image2D& a, const Image2D& b, const FsimOptions& o = {});
double fsim(const RgbImage& a, const RgbImage& b, const FsimOptions& o = {});

/// Population variance of the 4-neighbour Laplacian over interior pixels.
double vol(const Image2D& img);
/// VOL of the 0-255 luma.
double vol(const RgbImage& img);

struct PairedTestResult {
  std::string metric;
  std::size_t n = 0;
  double mean_difference = 0.0;  ///< mean of x - y
  double sd_difference = 0.0;
  bool degenerate = false;  ///< zero variance of differences; t and p are absent
  std::optional<double> t;
  std::optional<double> p;  ///< two-sided
};

PairedTestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y,
                               const std::string& metric = {});

// ---------------------------------------------------------------------------
// Reports

struct NamedRgb {
  std::string id;
  RgbImage image;
};

inline const std::vector<std::string> kMetricNames = {"mse", "psnr", "ssim", "ms_ssim", "fsim", "vol"};

struct MetricReport {
  std::string model;
  std::vector<std::string> ids;
  std::map<std::string, std::vector<double>> per_image;  ///< keyed by kMetricNames
  std::map<std::string, double> mean;
  double psnr_of_mean_mse = 0.0;  ///< the pooled alternative to mean per-image PSNR
  int ms_ssim_scales = 5;
};

/// Predictions and targets are matched by id; both sets must agree.
MetricReport evaluate_dataset(const std::vector<NamedRgb>& predictions, const std::vector<NamedRgb>& targets,
                              const std::string& model = {});

/// One paired test per metric; the reports must cover the same ids.
std::vector<PairedTestResult> compare_models(const MetricReport& a, const MetricReport& b);

/// report.json plus a tab-separated per-image table.
void write_report(const MetricReport& r, const std::filesystem::path& dir);
MetricReport read_report(const std::filesystem::path& json_path);
/// comparison.json, comparison.tsv and a long-format per-image difference
/// table (id, metric, a, b, a-b) for violin plots.
void write_comparison(const MetricReport& a, const MetricReport& b, const std::vector<PairedTestResult>& tests,
                      const std::filesystem::path& dir);

}  // namespace inout
