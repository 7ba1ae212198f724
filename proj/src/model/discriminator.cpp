#include "inout/errors.hpp"
#include "inout/model.hpp"

namespace inout {

std::string to_string(DiscriminatorLayout l) { return l == DiscriminatorLayout::Patch ? "patch" : "global"; }

DiscriminatorLayout discriminator_layout_from_string(const std::string& s) {
  if (s == "global") return DiscriminatorLayout::Global;
  if (s == "patch") return DiscriminatorLayout::Patch;
  throw InvalidArgument("unknown discriminator layout '" + s + "' (global|patch)");
}

void DiscriminatorSpec::validate() const {
  if (in_channels < 1 || base_width < 1) throw InvalidArgument("discriminator channel counts must be positive");
  if (strided_layers < 1) throw InvalidArgument("discriminator needs at least one strided layer");
}

int DiscriminatorSpec::min_input_size() const {
  const int stride = 1 << strided_layers;
  return layout == DiscriminatorLayout::Global ? 4 * stride : 3 * stride;
}

namespace {

int disc_width(const DiscriminatorSpec& s, int k) { return s.base_width * std::min(1 << std::min(k, 3), 8); }

void add_norm(torch::nn::Sequential& seq, NormKind kind, int channels) {
  switch (kind) {
    case NormKind::Batch: seq->push_back(torch::nn::BatchNorm2d(channels)); break;
    case NormKind::Instance:
      seq->push_back(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(channels)));
      break;
    case NormKind::None: break;
  }
}

torch::nn::Conv2d conv(int in, int out, int stride, int padding, bool bias) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(stride).padding(padding).bias(bias));
}

}  // namespace

DiscriminatorImpl::DiscriminatorImpl(DiscriminatorSpec spec) : spec_(spec) {
  spec_.validate();
  const bool bias = spec_.norm != NormKind::Batch;
  const auto lrelu = torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2));
  torch::nn::Sequential seq;
  seq->push_back(conv(spec_.in_channels, spec_.base_width, 2, 1, true));
  seq->push_back(lrelu);
  int width = spec_.base_width;
  for (int k = 1; k < spec_.strided_layers; ++k) {
    const int next = disc_width(spec_, k);
    seq->push_back(conv(width, next, 2, 1, bias));
    add_norm(seq, spec_.norm, next);
    seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    width = next;
  }
  if (spec_.layout == DiscriminatorLayout::Patch) {
    const int next = disc_width(spec_, spec_.strided_layers);
    seq->push_back(conv(width, next, 1, 1, bias));
    add_norm(seq, spec_.norm, next);
    seq->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    seq->push_back(conv(next, 1, 1, 1, true));
  } else {
    seq->push_back(conv(width, 1, 1, 0, true));
  }
  body_ = register_module("body", seq);
}

torch::Tensor DiscriminatorImpl::logits(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != spec_.in_channels) {
    throw InvalidArgument("discriminator expects (N," + std::to_string(spec_.in_channels) + ",H,W) input");
  }
  const int need = spec_.min_input_size();
  if (input.size(2) < need || input.size(3) < need) {
    throw InvalidArgument("discriminator input " + std::to_string(input.size(2)) + "x" +
                          std::to_string(input.size(3)) + " is smaller than its " + std::to_string(need) +
                          "-pixel footprint");
  }
  auto out = body_->forward(input);
  if (spec_.layout == DiscriminatorLayout::Global && (out.size(2) > 1 || out.size(3) > 1)) {
    out = out.mean({2, 3}, /*keepdim=*/true);
  }
  return out;
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& condition, const torch::Tensor& candidate) {
  auto input = condition.defined() ? torch::cat({condition, candidate}, 1) : candidate;
  return torch::sigmoid(logits(input));
}

std::int64_t DiscriminatorImpl::macs(int height, int width) const {
  std::int64_t total = 0;
  std::int64_t h = height, w = width;
  int c = spec_.in_channels;
  for (int k = 0; k < spec_.strided_layers; ++k) {
    const int next = disc_width(spec_, k);
    h /= 2;
    w /= 2;
    total += static_cast<std::int64_t>(next) * h * w * c * 16;
    c = next;
  }
  if (spec_.layout == DiscriminatorLayout::Patch) {
    const int next = disc_width(spec_, spec_.strided_layers);
    h -= 1;
    w -= 1;
    total += static_cast<std::int64_t>(next) * h * w * c * 16;
    h -= 1;
    w -= 1;
    total += h * w * next * 16;
  } else {
    h -= 3;
    w -= 3;
    total += h * w * c * 16;
  }
  return total;
}

}  // namespace inout
