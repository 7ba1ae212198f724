#include <doctest.h>

#include <cmath>
#include <random>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"
#include "oracles/metric_oracles.hpp"
#include "test_util.hpp"

using namespace inout;

namespace {

Image2D random_field(int h, int w, unsigned seed, double lo = 0.0, double hi = 255.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Image2D img(h, w);
  for (double& v : img.values) v = u(gen);
  return img;
}

/// Smooth structured field with a little noise: closer to natural content
/// than white noise, so phase congruency is non-trivial.
Image2D structured(int h, int w, unsigned seed, double noise) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n(0.0, noise);
  Image2D img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      img.at(i, j) = std::clamp(128.0 + 60.0 * std::sin(0.3 * i + 0.1 * seed) * std::cos(0.21 * j) +
                                    (i > h / 2 ? 40.0 : -40.0) + n(gen),
                                0.0, 255.0);
  return img;
}

oracle::Grid grid(const Image2D& img) {
  oracle::Grid g(img.height, std::vector<double>(img.width));
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j) g[i][j] = img.at(i, j);
  return g;
}

RgbImage grey_rgb(const Image2D& unit) {
  RgbImage out(unit.height, unit.width);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < unit.height; ++i)
      for (int j = 0; j < unit.width; ++j) out.at(c, i, j) = unit.at(i, j);
  return out;
}

Image2D box_blur(const Image2D& img) {
  Image2D out = img;
  for (int i = 1; i + 1 < img.height; ++i)
    for (int j = 1; j + 1 < img.width; ++j) {
      double s = 0;
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b) s += img.at(i + a, j + b);
      out.at(i, j) = s / 9;
    }
  return out;
}

}  // namespace

TEST_CASE("mse and psnr closed forms") {
  RgbImage a(8, 8, 0.5), b(8, 8, 0.5 + 10.0 / 255.0);
  CHECK(mse(a, b) == doctest::Approx(100.0));
  CHECK(psnr(a, b) == doctest::Approx(28.1308).epsilon(1e-5));
  CHECK(psnr(a, a) == kInfinitePsnr);
  CHECK(psnr_from_mse(255.0 * 255.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr_from_mse(-1.0), InvalidArgument);
  CHECK_THROWS_AS(mse(RgbImage(2, 2), RgbImage(2, 3)), InvalidArgument);
  CHECK(mse(Image2D(3, 3, 0.0), Image2D(3, 3, 1.0)) == doctest::Approx(255.0 * 255.0));
}

TEST_CASE("ssim of uniform fields reduces to the luminance term") {
  const double c1 = (0.01 * 255) * (0.01 * 255);
  for (auto [x, y] : {std::pair{100.0, 120.0}, {0.0, 255.0}, {30.0, 31.0}}) {
    const double want = (2 * x * y + c1) / (x * x + y * y + c1);
    CHECK(ssim_gray(Image2D(20, 20, x), Image2D(20, 20, y)) == doctest::Approx(want).epsilon(1e-12));
  }
  const auto f = random_field(16, 16, 1);
  CHECK(ssim_gray(f, f) == 1.0);
  CHECK_THROWS_AS(ssim_gray(Image2D(8, 8), Image2D(8, 8)), InvalidArgument);
  CHECK_THROWS_AS(ssim_gray(Image2D(16, 16), Image2D(16, 17)), InvalidArgument);
}

TEST_CASE("ssim matches the direct-window oracle") {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    const auto a = structured(32, 27, seed, 10.0);
    auto b = a;
    std::mt19937 gen(seed + 100);
    std::normal_distribution<double> n(0.0, 12.0);
    for (double& v : b.values) v = std::clamp(v + n(gen), 0.0, 255.0);
    const auto want = oracle::ssim(grid(a), grid(b));
    CHECK(ssim_gray(a, b) == doctest::Approx(want.ssim).epsilon(1e-9));
  }
}

TEST_CASE("ssim properties") {
  const auto a = random_field(24, 24, 5);
  const auto b = random_field(24, 24, 6);
  const double s = ssim_gray(a, b);
  CHECK(s == doctest::Approx(ssim_gray(b, a)).epsilon(1e-12));
  CHECK(s < 1.0);
  CHECK(s >= -1.0);
}

TEST_CASE("ms-ssim weights and scale limits") {
  const auto w = standard_ms_ssim_weights();
  CHECK(w.size() == 5);
  double sum = 0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
  const auto t = truncated_ms_ssim_weights(3);
  CHECK(t.size() == 3);
  CHECK(t[0] + t[1] + t[2] == doctest::Approx(1.0));
  CHECK(t[1] / t[0] == doctest::Approx(w[1] / w[0]));
  CHECK(max_ms_ssim_scales(176, 176) == 5);
  CHECK(max_ms_ssim_scales(175, 175) == 4);
  CHECK(max_ms_ssim_scales(64, 64) == 3);
  CHECK(max_ms_ssim_scales(10, 64) == 0);
  CHECK_THROWS_AS(truncated_ms_ssim_weights(0), InvalidArgument);
  CHECK_THROWS_AS(ms_ssim_gray(Image2D(64, 64), Image2D(64, 64), standard_ms_ssim_weights()), InvalidArgument);
}

TEST_CASE("ms-ssim matches the oracle") {
  const auto a = structured(64, 64, 4, 6.0);
  auto b = box_blur(a);
  const auto w = truncated_ms_ssim_weights(3);
  CHECK(ms_ssim_gray(a, b, w) == doctest::Approx(oracle::ms_ssim(grid(a), grid(b), w)).epsilon(1e-9));

  const auto big_a = structured(176, 176, 9, 8.0);
  const auto big_b = box_blur(big_a);
  CHECK(ms_ssim_gray(big_a, big_b, standard_ms_ssim_weights()) ==
        doctest::Approx(oracle::ms_ssim(grid(big_a), grid(big_b), standard_ms_ssim_weights())).epsilon(1e-9));
  CHECK(ms_ssim_gray(a, a, w) == doctest::Approx(1.0));
}

TEST_CASE("phase congruency and fsim match the reference port") {
  for (auto [h, w] : {std::pair{32, 32}, {33, 40}}) {
    const auto a = structured(h, w, 2, 4.0);
    auto b = box_blur(a);
    const auto pc = phase_congruency(a);
    const auto want = oracle::phasecong(grid(a));
    double worst = 0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) worst = std::max(worst, std::abs(pc.at(i, j) - want[i][j]));
    CHECK(worst < 1e-9);
    CHECK(fsim_gray(a, b) == doctest::Approx(oracle::fsim(grid(a), grid(b))).epsilon(1e-9));
  }
}

TEST_CASE("fsim properties") {
  const auto a = structured(48, 48, 3, 5.0);
  CHECK(fsim_gray(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const auto b = box_blur(a);
  const auto c = box_blur(box_blur(b));
  const double f1 = fsim_gray(a, b);
  const double f2 = fsim_gray(a, c);
  CHECK(f1 < 1.0);
  CHECK(f2 < f1);
  CHECK(fsim_gray(a, b) == doctest::Approx(fsim_gray(b, a)).epsilon(1e-12));
  CHECK_THROWS_AS(fsim_gray(Image2D(16, 16), Image2D(16, 16)), InvalidArgument);
  // Flat images carry no congruent features; the score is still defined.
  CHECK(std::isfinite(fsim_gray(Image2D(32, 32, 10.0), Image2D(32, 32, 200.0))));
  for (double v : phase_congruency(Image2D(32, 32, 7.0)).values) CHECK(v == 0.0);
}

TEST_CASE("vol closed forms") {
  Image2D board(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) board.at(i, j) = (i + j) % 2;
  CHECK(vol(board) == doctest::Approx(16.0));
  CHECK(vol(Image2D(5, 5, 3.0)) == 0.0);
  Image2D ramp(5, 7);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 7; ++j) ramp.at(i, j) = 2.0 * i - 3.0 * j;
  CHECK(vol(ramp) == doctest::Approx(0.0));
  const auto f = random_field(32, 32, 8);
  CHECK(vol(box_blur(f)) < vol(f));
  CHECK(vol(grey_rgb(board)) == doctest::Approx(16.0 * 255.0 * 255.0));
  CHECK_THROWS_AS(vol(Image2D(2, 5)), InvalidArgument);
}

TEST_CASE("paired t-test against quadrature") {
  const std::vector<double> x{1.1, 2.0, 3.2, 4.1}, y{1.0, 2.5, 2.9, 4.6};
  const auto r = paired_t_test(x, y, "m");
  CHECK(r.metric == "m");
  CHECK(r.n == 4);
  CHECK(r.mean_difference == doctest::Approx(-0.15));
  REQUIRE(r.t.has_value());
  const double sd = std::sqrt(((0.25) * (0.25) + (0.35) * (0.35) + (0.45) * (0.45) + (0.35) * (0.35)) / 3.0);
  CHECK(r.sd_difference == doctest::Approx(sd));
  CHECK(*r.t == doctest::Approx(-0.15 / (sd / 2.0)));
  CHECK(*r.p == doctest::Approx(oracle::student_two_sided_p(*r.t, 3.0)).epsilon(1e-8));

  std::mt19937 gen(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(12), b(12);
    for (int k = 0; k < 12; ++k) {
      a[k] = n(gen);
      b[k] = a[k] + 0.3 + 0.5 * n(gen);
    }
    const auto t = paired_t_test(a, b);
    CHECK(*t.p == doctest::Approx(oracle::student_two_sided_p(*t.t, 11.0)).epsilon(1e-8));
    CHECK(*t.p > 0.0);
    CHECK(*t.p <= 1.0);
  }
}

TEST_CASE("paired t-test degenerate and invalid inputs") {
  const auto same = paired_t_test({1, 2, 3}, {1, 2, 3});
  CHECK(same.degenerate);
  CHECK_FALSE(same.t.has_value());
  CHECK_FALSE(same.p.has_value());
  const auto shift = paired_t_test({1.1, 2.1, 3.1}, {1, 2, 3});
  CHECK(shift.degenerate);
  CHECK(shift.mean_difference == doctest::Approx(0.1));
  CHECK_THROWS_AS(paired_t_test({1}, {2}), InvalidArgument);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {2}), InvalidArgument);
}

TEST_CASE("dataset report aggregates per-image metrics") {
  std::vector<NamedRgb> preds, targets;
  for (int k = 0; k < 3; ++k) {
    Image2D t(40, 40);
    for (int i = 0; i < 40; ++i)
      for (int j = 0; j < 40; ++j) t.at(i, j) = 0.5 + 0.4 * std::sin(0.2 * i * (k + 1)) * std::cos(0.3 * j);
    Image2D p = t;
    for (auto& v : p.values) v += 0.02 * (k + 1);
    targets.push_back({"img" + std::to_string(k), grey_rgb(t)});
    preds.push_back({"img" + std::to_string(k), grey_rgb(p)});
  }
  std::swap(targets[0], targets[2]);
  const auto r = evaluate_dataset(preds, targets, "model-a");
  CHECK(r.ids == std::vector<std::string>{"img0", "img1", "img2"});
  CHECK(r.ms_ssim_scales == 2);
  double mean_mse = 0;
  for (int k = 0; k < 3; ++k) {
    const double d = 255.0 * 0.02 * (k + 1);
    CHECK(r.per_image.at("mse")[k] == doctest::Approx(d * d));
    mean_mse += d * d / 3;
  }
  CHECK(r.mean.at("mse") == doctest::Approx(mean_mse));
  CHECK(r.psnr_of_mean_mse == doctest::Approx(psnr_from_mse(mean_mse)));
  CHECK(r.mean.at("psnr") > r.psnr_of_mean_mse);
  for (const auto& name : kMetricNames) CHECK(r.per_image.at(name).size() == 3);

  testutil::TempDir dir;
  write_report(r, dir.path);
  CHECK(std::filesystem::exists(dir.path / "metrics.tsv"));
  const auto back = read_report(dir.path / "report.json");
  CHECK(back.ids == r.ids);
  CHECK(back.per_image.at("fsim")[1] == r.per_image.at("fsim")[1]);

  auto self = evaluate_dataset(targets, targets, "oracle");
  CHECK(self.mean.at("psnr") == kInfinitePsnr);
  write_report(self, dir.path / "self");
  CHECK(read_report(dir.path / "self" / "report.json").mean.at("psnr") == kInfinitePsnr);

  const auto tests = compare_models(r, self);
  CHECK(tests.size() == kMetricNames.size());
  write_comparison(r, self, tests, dir.path / "cmp");
  CHECK(std::filesystem::exists(dir.path / "cmp" / "differences.tsv"));

  auto missing = targets;
  missing.pop_back();
  CHECK_THROWS_AS(evaluate_dataset(preds, missing), InvalidArgument);
  auto dup = targets;
  dup[1].id = dup[0].id;
  CHECK_THROWS_AS(evaluate_dataset(preds, dup), InvalidArgument);
}
