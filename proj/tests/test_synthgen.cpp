#include <doctest.h>

#include <numeric>

#include "inout/imagecore.hpp"
#include "inout/synthgen.hpp"

using namespace inout;

namespace {

PhantomConfig small(std::uint64_t seed) {
  PhantomConfig c;
  c.image_size = 64;
  c.seed = RngSeed{seed};
  return c;
}

}  // namespace

TEST_CASE("no nuclei leaves the H channel empty") {
  auto c = small(1);
  c.nuclei_min = c.nuclei_max = 0;
  const auto s = generate_phantom(c);
  for (double v : s.h_target.values) CHECK(v == 0.0);
  // Without hematoxylin the red channel is never darker than green.
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) CHECK(s.rgb_target.at(0, i, j) >= s.rgb_target.at(1, i, j));
}

TEST_CASE("phantoms are a pure function of the seed") {
  const auto a = generate_phantom(small(9));
  const auto b = generate_phantom(small(9));
  const auto other = generate_phantom(small(10));
  CHECK(a.rcm.values == b.rcm.values);
  CHECK(a.h_target.values == b.h_target.values);
  CHECK(a.rgb_target.values == b.rgb_target.values);
  CHECK(a.artifact->values == b.artifact->values);
  CHECK(a.rcm.values != other.rcm.values);
}

TEST_CASE("all channels are co-registered and in range") {
  const auto s = generate_phantom(small(3));
  CHECK(s.rcm.same_shape(s.h_target));
  CHECK(s.rcm.same_shape(s.e_target));
  CHECK(s.rgb_target.height == 64);
  for (double v : s.rcm.values) CHECK((v >= 0.0 && v <= 1.0));
  for (double v : s.rgb_target.values) CHECK((v > 0.0 && v <= 1.0));
}

TEST_CASE("without speckle the brightest pixels are exactly the artifact") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto c = small(seed);
    c.image_size = 128;
    c.speckle_strength = 0.0;
    const auto s = generate_phantom(c);
    REQUIRE(s.artifact.has_value());
    const double thr = percentile(s.rcm.values, 99.9);
    for (std::size_t k = 0; k < s.rcm.size(); ++k) {
      if (s.rcm.values[k] > thr) CHECK(s.artifact->values[k] == 1);
      CHECK((s.rcm.values[k] > kRcmTissueCeiling) == (s.artifact->values[k] == 1));
    }
  }
}

TEST_CASE("nuclei are separable in the H target") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = small(seed);
    c.artifact_enabled = false;
    const auto s = generate_phantom(c);
    double in = 0, out = 0;
    std::size_t nin = 0, nout = 0;
    for (double v : s.h_target.values) {
      if (v > 0.5) in += v, ++nin;
      else out += v, ++nout;
    }
    if (nin == 0) continue;
    CHECK(in / nin > out / nout);
  }
}

TEST_CASE("corpus shape, ids and determinism") {
  auto c = small(5);
  c.image_size = 32;
  std::vector<int> counts{60, 45, 50, 47, 48, 52, 41, 39, 50, 44, 46, 48, 45, 47, 43};
  REQUIRE(std::accumulate(counts.begin(), counts.end(), 0) == 705);
  const auto corpus = generate_corpus(c, counts);
  CHECK(corpus.size() == 705);
  CHECK(corpus.front().patient_id == "P01");
  CHECK(corpus.back().patient_id == "P15");
  CHECK(corpus.front().id == "P01_0000");

  const auto a = generate_corpus(c, 2, 3);
  const auto b = generate_corpus(c, 2, 3);
  REQUIRE(a.size() == 6);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].rcm.values == b[k].rcm.values);
  CHECK(generate_corpus(c, 1, 1).size() == 1);
}
