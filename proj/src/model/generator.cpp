#include "inout/errors.hpp"
#include "inout/model.hpp"

namespace inout {

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::Batch: return "batch";
    case NormKind::Instance: return "instance";
    case NormKind::None: return "none";
  }
  return "batch";
}

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "batch") return NormKind::Batch;
  if (s == "instance") return NormKind::Instance;
  if (s == "none") return NormKind::None;
  throw InvalidArgument("unknown norm kind '" + s + "' (batch|instance|none)");
}

namespace {

torch::nn::AnyModule make_norm(NormKind kind, int channels) {
  switch (kind) {
    case NormKind::Batch: return torch::nn::AnyModule(torch::nn::BatchNorm2d(channels));
    case NormKind::Instance:
      return torch::nn::AnyModule(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(channels)));
    case NormKind::None: break;
  }
  return torch::nn::AnyModule(torch::nn::Identity());
}

}  // namespace

void GeneratorSpec::validate() const {
  if (levels < 1) throw InvalidArgument("generator levels must be >= 1");
  if (in_channels < 1 || out_channels < 1 || base_width < 1) {
    throw InvalidArgument("generator channel counts must be positive");
  }
  if (dropout_levels < 0) throw InvalidArgument("dropout_levels must be >= 0");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw InvalidArgument("dropout_rate outside [0,1)");
}

int GeneratorSpec::width_at(int level) const { return base_width * std::min(1 << std::min(level, 3), 8); }

bool GeneratorSpec::dropout_at(int level) const {
  return dropout_rate > 0.0 && level >= 1 && level <= levels - 2 && level >= levels - 1 - dropout_levels;
}

GeneratorImpl::GeneratorImpl(GeneratorSpec spec) : spec_(spec) {
  spec_.validate();
  const int L = spec_.levels;
  const bool bias = spec_.norm != NormKind::Batch;
  for (int k = 0; k < L; ++k) {
    const int in = k == 0 ? spec_.in_channels : spec_.width_at(k - 1);
    auto conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(in, spec_.width_at(k), 4).stride(2).padding(1).bias(bias));
    down_.push_back(register_module("down" + std::to_string(k), conv));
    const bool has_norm = k >= 1 && k <= L - 2;
    auto norm = has_norm ? make_norm(spec_.norm, spec_.width_at(k)) : torch::nn::AnyModule(torch::nn::Identity());
    register_module("down_norm" + std::to_string(k), norm.ptr());
    down_norm_.push_back(std::move(norm));
  }
  for (int k = 0; k < L; ++k) {
    const int in = (k == L - 1 || L == 1) ? spec_.width_at(k) : 2 * spec_.width_at(k);
    const int out = k == 0 ? spec_.out_channels : spec_.width_at(k - 1);
    auto conv = torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(k == 0 || bias));
    up_.push_back(register_module("up" + std::to_string(k), conv));
    auto norm = k >= 1 ? make_norm(spec_.norm, out) : torch::nn::AnyModule(torch::nn::Identity());
    register_module("up_norm" + std::to_string(k), norm.ptr());
    up_norm_.push_back(std::move(norm));
    dropout_.push_back(register_module("dropout" + std::to_string(k),
                                       torch::nn::Dropout(spec_.dropout_at(k) ? spec_.dropout_rate : 0.0)));
  }
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  const int L = spec_.levels;
  const std::int64_t step = std::int64_t{1} << L;
  if (x.dim() != 4 || x.size(1) != spec_.in_channels) {
    throw InvalidArgument("generator expects (N," + std::to_string(spec_.in_channels) + ",H,W) input");
  }
  if (x.size(2) % step != 0 || x.size(3) % step != 0) {
    throw InvalidArgument("generator input " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                          " is not divisible by 2^" + std::to_string(L));
  }
  std::vector<torch::Tensor> skips(static_cast<std::size_t>(L));
  torch::Tensor h = down_[0]->forward(x);
  skips[0] = h;
  for (int k = 1; k < L; ++k) {
    h = torch::leaky_relu(h, 0.2);
    h = down_norm_[k].forward(down_[k]->forward(h));
    skips[k] = h;
  }
  for (int k = L - 1; k >= 0; --k) {
    if (k != L - 1) h = torch::cat({skips[k], h}, 1);
    h = up_[k]->forward(torch::relu(h));
    if (k == 0) break;
    h = dropout_[k]->forward(up_norm_[k].forward(h));
  }
  return torch::tanh(h);
}

std::int64_t GeneratorImpl::macs(int height, int width) const {
  std::int64_t total = 0;
  std::int64_t hh = height, ww = width;
  std::vector<std::pair<std::int64_t, std::int64_t>> sizes;
  for (int k = 0; k < spec_.levels; ++k) {
    const int in = k == 0 ? spec_.in_channels : spec_.width_at(k - 1);
    hh /= 2;
    ww /= 2;
    sizes.emplace_back(hh, ww);
    total += static_cast<std::int64_t>(spec_.width_at(k)) * hh * ww * in * 16;
  }
  for (int k = spec_.levels - 1; k >= 0; --k) {
    const int in = k == spec_.levels - 1 ? spec_.width_at(k) : 2 * spec_.width_at(k);
    const int out = k == 0 ? spec_.out_channels : spec_.width_at(k - 1);
    total += static_cast<std::int64_t>(in) * sizes[k].first * sizes[k].second * out * 16;
  }
  return total;
}

}  // namespace inout
