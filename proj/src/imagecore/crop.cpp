#include "inout/errors.hpp"
#include "inout/imagecore.hpp"

namespace inout {

std::vector<CropOffset> crop_offsets(int height, int width, int size, int count, Rng& rng) {
  if (size < 1 || count < 1) throw InvalidArgument("crop size and count must be positive");
  if (size > height || size > width) {
    throw InvalidArgument("crop size " + std::to_string(size) + " exceeds image " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
  std::uniform_int_distribution<int> rows(0, height - size);
  std::uniform_int_distribution<int> cols(0, width - size);
  std::vector<CropOffset> out(static_cast<std::size_t>(count));
  for (auto& o : out) {
    o.row = rows(rng);
    o.col = cols(rng);
  }
  return out;
}

Image2D crop(const Image2D& img, CropOffset at, int size) {
  if (at.row < 0 || at.col < 0 || at.row + size > img.height || at.col + size > img.width) {
    throw InvalidArgument("crop window outside image");
  }
  Image2D out(size, size, 0.0, img.bit_depth);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) out.at(i, j) = img.at(at.row + i, at.col + j);
  }
  return out;
}

RgbImage crop(const RgbImage& img, CropOffset at, int size) {
  if (at.row < 0 || at.col < 0 || at.row + size > img.height || at.col + size > img.width) {
    throw InvalidArgument("crop window outside image");
  }
  RgbImage out(size, size);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) out.at(c, i, j) = img.at(c, at.row + i, at.col + j);
    }
  }
  return out;
}

std::vector<PatchGroup> random_crop_set(const std::vector<Image2D>& gray,
                                        const std::vector<RgbImage>& rgb, int size, int count,
                                        RngSeed seed) {
  if (gray.empty() && rgb.empty()) throw InvalidArgument("random_crop_set needs at least one image");
  const int h = gray.empty() ? rgb.front().height : gray.front().height;
  const int w = gray.empty() ? rgb.front().width : gray.front().width;
  for (const auto& g : gray) {
    if (g.height != h || g.width != w) throw InvalidArgument("co-registered inputs differ in size");
  }
  for (const auto& c : rgb) {
    if (c.height != h || c.width != w) throw InvalidArgument("co-registered inputs differ in size");
  }
  Rng rng(seed.value);
  std::vector<PatchGroup> groups;
  for (const auto& off : crop_offsets(h, w, size, count, rng)) {
    PatchGroup g;
    g.offset = off;
    for (const auto& im : gray) g.gray.push_back(crop(im, off, size));
    for (const auto& im : rgb) g.rgb.push_back(crop(im, off, size));
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace inout
