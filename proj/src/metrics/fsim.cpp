#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include <opencv2/core.hpp>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"

namespace inout {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

cv::Mat fft2(const Image2D& img) {
  cv::Mat m(img.height, img.width, CV_64F, const_cast<double*>(img.values.data()));
  cv::Mat out;
  cv::dft(m, out, cv::DFT_COMPLEX_OUTPUT);
  return out;
}

cv::Mat ifft2(const cv::Mat& spectrum) {
  cv::Mat out;
  cv::dft(spectrum, out, cv::DFT_INVERSE | cv::DFT_SCALE | cv::DFT_COMPLEX_OUTPUT);
  return out;
}

/// Frequency coordinate of FFT index u along an axis of length n, in the
/// unshifted layout.
double freq(int u, int n) {
  if (n % 2 == 1) {
    const int half = (n - 1) / 2;
    return (u <= half ? u : u - n) / static_cast<double>(std::max(n - 1, 1));
  }
  return (u < n / 2 ? u : u - n) / static_cast<double>(n);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

Image2D average_downsample(const Image2D& img, int f) {
  if (f == 1) return img;
  // 'same'-size box filter with zero padding, then every f-th sample.
  const int off = f / 2;
  Image2D smooth(img.height, img.width);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j) {
      double s = 0.0;
      for (int a = i + off - (f - 1); a <= i + off; ++a)
        for (int b = j + off - (f - 1); b <= j + off; ++b)
          if (a >= 0 && a < img.height && b >= 0 && b < img.width) s += img.at(a, b);
      smooth.at(i, j) = s / (f * f);
    }
  Image2D out((img.height + f - 1) / f, (img.width + f - 1) / f);
  for (int i = 0; i < out.height; ++i)
    for (int j = 0; j < out.width; ++j) out.at(i, j) = smooth.at(i * f, j * f);
  return out;
}

Image2D gradient_magnitude(const Image2D& y) {
  static constexpr double kx[3][3] = {{3, 0, -3}, {10, 0, -10}, {3, 0, -3}};
  Image2D g(y.height, y.width);
  auto px = [&](int i, int j) { return (i < 0 || j < 0 || i >= y.height || j >= y.width) ? 0.0 : y.at(i, j); };
  for (int i = 0; i < y.height; ++i)
    for (int j = 0; j < y.width; ++j) {
      double gx = 0.0;
      double gy = 0.0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) {
          const double v = px(i + a, j + b);
          gx += kx[a + 1][b + 1] * v;
          gy += kx[b + 1][a + 1] * v;
        }
      g.at(i, j) = std::sqrt(gx * gx + gy * gy) / 16.0;
    }
  return g;
}

}  // namespace

Image2D phase_congruency(const Image2D& img, const FsimOptions& o) {
  const int rows = img.height;
  const int cols = img.width;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  const cv::Mat spectrum = fft2(img);

  std::vector<double> radius(n), sin_t(n), cos_t(n), lowpass(n);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double x = freq(j, cols);
      const double y = freq(i, rows);
      const std::size_t k = static_cast<std::size_t>(i) * cols + j;
      const double r = std::sqrt(x * x + y * y);
      lowpass[k] = 1.0 / (1.0 + std::pow(r / 0.45, 30.0));
      radius[k] = r;
      const double th = std::atan2(-y, x);
      sin_t[k] = std::sin(th);
      cos_t[k] = std::cos(th);
    }
  radius[0] = 1.0;

  std::vector<std::vector<double>> log_gabor(o.scales, std::vector<double>(n));
  const double log_sigma2 = 2.0 * std::log(o.sigma_onf) * std::log(o.sigma_onf);
  for (int s = 0; s < o.scales; ++s) {
    const double fo = 1.0 / (o.min_wavelength * std::pow(o.mult, s));
    for (std::size_t k = 0; k < n; ++k) {
      const double l = std::log(radius[k] / fo);
      log_gabor[s][k] = std::exp(-l * l / log_sigma2) * lowpass[k];
    }
    log_gabor[s][0] = 0.0;
  }

  const double theta_sigma = kPi / o.orientations / o.d_theta_on_sigma;
  std::vector<double> energy_all(n, 0.0), an_all(n, 0.0);
  std::vector<cv::Mat> eo(o.scales);
  std::vector<std::vector<double>> spatial(o.scales, std::vector<double>(n));
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  for (int ori = 0; ori < o.orientations; ++ori) {
    const double angle = ori * kPi / o.orientations;
    std::vector<double> spread(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double ds = sin_t[k] * std::cos(angle) - cos_t[k] * std::sin(angle);
      const double dc = cos_t[k] * std::cos(angle) + sin_t[k] * std::sin(angle);
      const double dth = std::abs(std::atan2(ds, dc));
      spread[k] = std::exp(-dth * dth / (2.0 * theta_sigma * theta_sigma));
    }
    std::vector<double> sum_e(n, 0.0), sum_o(n, 0.0), sum_an(n, 0.0);
    double em_n = 0.0;
    for (int s = 0; s < o.scales; ++s) {
      cv::Mat filt(rows, cols, CV_64FC2);
      cv::Mat filt_only(rows, cols, CV_64FC2);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          const double f = log_gabor[s][k] * spread[k];
          const auto c = spectrum.at<cv::Vec2d>(i, j);
          filt.at<cv::Vec2d>(i, j) = {c[0] * f, c[1] * f};
          filt_only.at<cv::Vec2d>(i, j) = {f, 0.0};
          if (s == 0) em_n += f * f;
        }
      const cv::Mat h = ifft2(filt_only);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
          spatial[s][static_cast<std::size_t>(i) * cols + j] = h.at<cv::Vec2d>(i, j)[0] * sqrt_n;
      eo[s] = ifft2(filt);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          const auto v = eo[s].at<cv::Vec2d>(i, j);
          const std::size_t k = static_cast<std::size_t>(i) * cols + j;
          sum_an[k] += std::hypot(v[0], v[1]);
          sum_e[k] += v[0];
          sum_o[k] += v[1];
        }
    }
    std::vector<double> energy(n, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cols + j;
        const double xe = std::sqrt(sum_e[k] * sum_e[k] + sum_o[k] * sum_o[k]) + o.epsilon;
        const double me = sum_e[k] / xe;
        const double mo = sum_o[k] / xe;
        for (int s = 0; s < o.scales; ++s) {
          const auto v = eo[s].at<cv::Vec2d>(i, j);
          energy[k] += v[0] * me + v[1] * mo - std::abs(v[0] * mo - v[1] * me);
        }
      }

    std::vector<double> e2(n);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const auto v = eo[0].at<cv::Vec2d>(i, j);
        e2[static_cast<std::size_t>(i) * cols + j] = v[0] * v[0] + v[1] * v[1];
      }
    const double mean_e2n = -median_of(std::move(e2)) / std::log(0.5);
    const double noise_power = mean_e2n / em_n;
    double sum_an2 = 0.0;
    double sum_aiaj = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (int si = 0; si < o.scales; ++si) {
        sum_an2 += spatial[si][k] * spatial[si][k];
        for (int sj = si + 1; sj < o.scales; ++sj) sum_aiaj += spatial[si][k] * spatial[sj][k];
      }
    }
    const double noise_energy2 = 2.0 * noise_power * sum_an2 + 4.0 * noise_power * sum_aiaj;
    const double tau = std::sqrt(noise_energy2 / 2.0);
    const double noise_energy = tau * std::sqrt(kPi / 2.0);
    const double noise_sigma = std::sqrt((2.0 - kPi / 2.0) * tau * tau);
    const double t = (noise_energy + o.k * noise_sigma) / 1.7;
    for (std::size_t k = 0; k < n; ++k) {
      energy_all[k] += std::max(energy[k] - t, 0.0);
      an_all[k] += sum_an[k];
    }
  }

  Image2D pc(rows, cols);
  // A field with no oscillating content has zero amplitude everywhere; its
  // congruency is taken as zero.
  for (std::size_t k = 0; k < n; ++k) pc.values[k] = an_all[k] > 0.0 ? energy_all[k] / an_all[k] : 0.0;
  return pc;
}

double fsim_gray(const Image2D& a, const Image2D& b, const FsimOptions& o) {
  if (!a.same_shape(b)) throw InvalidArgument("FSIM inputs differ in size");
  if (a.height < 32 || a.width < 32) throw InvalidArgument("FSIM needs at least 32x32 pixels");
  const int f = std::max(1, static_cast<int>(std::lround(std::min(a.height, a.width) / 256.0)));
  const auto y1 = average_downsample(a, f);
  const auto y2 = average_downsample(b, f);
  const auto pc1 = phase_congruency(y1, o);
  const auto pc2 = phase_congruency(y2, o);
  const auto g1 = gradient_magnitude(y1);
  const auto g2 = gradient_magnitude(y2);
  double num = 0.0;
  double den = 0.0;
  double gm_only = 0.0;
  for (std::size_t k = 0; k < pc1.size(); ++k) {
    const double p1 = pc1.values[k];
    const double p2 = pc2.values[k];
    const double s_pc = (2.0 * p1 * p2 + o.t1) / (p1 * p1 + p2 * p2 + o.t1);
    const double m1 = g1.values[k];
    const double m2 = g2.values[k];
    const double s_g = (2.0 * m1 * m2 + o.t2) / (m1 * m1 + m2 * m2 + o.t2);
    const double pcm = std::max(p1, p2);
    num += s_pc * s_g * pcm;
    den += pcm;
    gm_only += s_g;
  }
  // No congruent features in either image: pooling weights vanish, fall back
  // to the unweighted gradient similarity.
  if (den == 0.0) return gm_only / static_cast<double>(pc1.size());
  return num / den;
}

double fsim(const RgbImage& a, const RgbImage& b, const FsimOptions& o) {
  return fsim_gray(luma255(a), luma255(b), o);
}

}  // namespace inout
