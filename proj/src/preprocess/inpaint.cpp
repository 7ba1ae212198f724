#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "inout/errors.hpp"
#include "inout/preprocess.hpp"

namespace inout {

std::size_t ArtifactMask::count() const {
  std::size_t n = 0;
  for (auto v : values) n += v != 0;
  return n;
}

InpaintResult inpaint(const Image2D& img, const ArtifactMask& mask, double tol, int max_iter) {
  if (mask.height != img.height || mask.width != img.width) {
    throw InvalidArgument("mask and image dimensions differ");
  }
  InpaintResult r{img, 0, 0.0};
  const std::size_t masked = mask.count();
  if (masked == 0) return r;
  if (masked == img.size()) throw InvalidArgument("mask covers the entire image");

  double sum = 0.0;
  std::vector<std::size_t> holes;
  holes.reserve(masked);
  for (std::size_t k = 0; k < img.size(); ++k) {
    if (mask.values[k]) {
      holes.push_back(k);
    } else {
      sum += img.values[k];
    }
  }
  const double seed = sum / static_cast<double>(img.size() - masked);
  for (auto k : holes) r.image.values[k] = seed;

  const int hgt = img.height;
  const int wid = img.width;
  std::vector<double> next(holes.size());
  for (r.iterations = 0; r.iterations < max_iter;) {
    double change = 0.0;
    for (std::size_t n = 0; n < holes.size(); ++n) {
      const int i = static_cast<int>(holes[n] / wid);
      const int j = static_cast<int>(holes[n] % wid);
      double acc = 0.0;
      int cnt = 0;
      if (i > 0) { acc += r.image.at(i - 1, j); ++cnt; }
      if (i + 1 < hgt) { acc += r.image.at(i + 1, j); ++cnt; }
      if (j > 0) { acc += r.image.at(i, j - 1); ++cnt; }
      if (j + 1 < wid) { acc += r.image.at(i, j + 1); ++cnt; }
      next[n] = acc / cnt;
      change = std::max(change, std::abs(next[n] - r.image.values[holes[n]]));
    }
    for (std::size_t n = 0; n < holes.size(); ++n) r.image.values[holes[n]] = next[n];
    ++r.iterations;
    r.final_change = change;
    if (change < tol) break;
  }
  return r;
}

ArtifactMask mask_from_calibration(const Image2D& calibration, double pct) {
  ArtifactMask m(calibration.height, calibration.width);
  const double thr = percentile(calibration.values, pct);
  const double lo = calibration.min();
  for (std::size_t k = 0; k < calibration.size(); ++k) {
    const double v = calibration.values[k];
    m.values[k] = (v >= thr && v > lo) ? 1 : 0;
  }
  return m;
}

ArtifactMask load_mask(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot read mask " + path.string());
  ArtifactMask out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out.set(i, j, m.at<std::uint8_t>(i, j) != 0);
  }
  return out;
}

void save_mask(const ArtifactMask& mask, const std::filesystem::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8U);
  for (int i = 0; i < mask.height; ++i) {
    for (int j = 0; j < mask.width; ++j) m.at<std::uint8_t>(i, j) = mask.at(i, j) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write mask " + path.string());
}

}  // namespace inout
