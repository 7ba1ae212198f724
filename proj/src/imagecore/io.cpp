#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "inout/errors.hpp"
#include "inout/imagecore.hpp"

namespace fs = std::filesystem;

namespace inout {
namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".tif" || ext == ".tiff" || ext == ".png";
}

Image2D from_mat(const cv::Mat& m, const fs::path& origin) {
  cv::Mat gray;
  if (m.channels() == 1) {
    gray = m;
  } else if (m.channels() == 3 || m.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    if (cv::countNonZero(planes[0] != planes[1]) != 0 || cv::countNonZero(planes[0] != planes[2]) != 0) {
      throw InvalidArgument("non-grayscale content in " + origin.string());
    }
    gray = planes[0];
  } else {
    throw InvalidArgument("unsupported channel count in " + origin.string());
  }

  Image2D img;
  img.height = gray.rows;
  img.width = gray.cols;
  img.values.resize(static_cast<std::size_t>(gray.rows) * gray.cols);
  cv::Mat as_double;
  switch (gray.depth()) {
    case CV_8U: img.bit_depth = 8; break;
    case CV_16U: img.bit_depth = 16; break;
    case CV_32F:
    case CV_64F: img.bit_depth = 0; break;
    default: throw InvalidArgument("unsupported pixel type in " + origin.string());
  }
  gray.convertTo(as_double, CV_64F);
  for (int i = 0; i < gray.rows; ++i) {
    const double* row = as_double.ptr<double>(i);
    std::copy(row, row + gray.cols, img.values.begin() + static_cast<std::ptrdiff_t>(i) * gray.cols);
  }
  return img;
}

cv::Mat to_mat(const Image2D& img) {
  int type = CV_16U;
  double scale = 1.0;
  if (img.bit_depth == 8) {
    type = CV_8U;
  } else if (img.bit_depth == 0) {
    scale = 65535.0;
  }
  cv::Mat m(img.height, img.width, type);
  const double hi = type == CV_8U ? 255.0 : 65535.0;
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      double v = std::clamp(std::round(img.at(i, j) * scale), 0.0, hi);
      if (type == CV_8U) {
        m.at<std::uint8_t>(i, j) = static_cast<std::uint8_t>(v);
      } else {
        m.at<std::uint16_t>(i, j) = static_cast<std::uint16_t>(v);
      }
    }
  }
  return m;
}

std::vector<Image2D> read_pages(const fs::path& file) {
  std::vector<cv::Mat> pages;
  if (!cv::imreadmulti(file.string(), pages, cv::IMREAD_UNCHANGED) || pages.empty()) {
    throw IoError("cannot read image file " + file.string());
  }
  std::vector<Image2D> out;
  out.reserve(pages.size());
  for (const auto& p : pages) out.push_back(from_mat(p, file));
  return out;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

}  // namespace

ImageStack load_stack(const fs::path& path) {
  ImageStack stack;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no image files in directory " + path.string());
    for (const auto& f : files) {
      auto pages = read_pages(f);
      stack.layers.insert(stack.layers.end(), pages.begin(), pages.end());
    }
  } else if (fs::is_regular_file(path)) {
    stack.layers = read_pages(path);
  } else {
    throw IoError("no such file or directory: " + path.string());
  }
  stack.validate();
  return stack;
}

void save_stack(const ImageStack& stack, const fs::path& path) {
  stack.validate();
  std::vector<cv::Mat> pages;
  for (const auto& l : stack.layers) pages.push_back(to_mat(l));
  ensure_parent(path);
  if (!cv::imwritemulti(path.string(), pages)) throw IoError("cannot write " + path.string());
}

Image2D load_image(const fs::path& path) {
  auto pages = read_pages(path);
  return pages.front();
}

void save_image(const Image2D& img, const fs::path& path) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), to_mat(img))) throw IoError("cannot write " + path.string());
}

RgbImage load_rgb(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot read image file " + path.string());
  double scale = m.depth() == CV_16U ? 1.0 / 65535.0 : m.depth() == CV_8U ? 1.0 / 255.0 : 1.0;
  if (m.channels() == 1) {
    cv::merge(std::vector<cv::Mat>{m, m, m}, m);
  } else if (m.channels() == 4) {
    std::vector<cv::Mat> planes;
    cv::split(m, planes);
    planes.pop_back();
    cv::merge(planes, m);
  }
  cv::Mat d;
  m.convertTo(d, CV_64FC3, scale);
  RgbImage out(d.rows, d.cols);
  for (int i = 0; i < d.rows; ++i) {
    for (int j = 0; j < d.cols; ++j) {
      const auto& px = d.at<cv::Vec3d>(i, j);
      out.at(0, i, j) = px[2];
      out.at(1, i, j) = px[1];
      out.at(2, i, j) = px[0];
    }
  }
  return out;
}

void save_rgb(const RgbImage& img, const fs::path& path) {
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      auto& px = m.at<cv::Vec3b>(i, j);
      for (int c = 0; c < 3; ++c) {
        px[2 - c] = static_cast<std::uint8_t>(std::round(std::clamp(img.at(c, i, j), 0.0, 1.0) * 255.0));
      }
    }
  }
  ensure_parent(path);
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write " + path.string());
}

Image2D to_unit_range(const Image2D& img) {
  if (img.bit_depth == 0) return img;
  Image2D out = img;
  const double full = img.bit_depth == 8 ? 255.0 : 65535.0;
  for (double& v : out.values) v /= full;
  out.bit_depth = 0;
  return out;
}

}  // namespace inout
