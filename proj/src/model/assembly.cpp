#include "inout/errors.hpp"
#include "inout/model.hpp"

namespace inout {

RgbConcatImpl::RgbConcatImpl(double init) {
  w_h = register_parameter("w_h", torch::full({3}, init));
  w_e = register_parameter("w_e", torch::full({3}, init));
}

torch::Tensor RgbConcatImpl::forward(const torch::Tensor& i_h, const torch::Tensor& i_e) {
  if (i_h.sizes() != i_e.sizes()) throw InvalidArgument("H and E channel images differ in shape");
  if (i_h.dim() != 4 || i_h.size(1) != 1) throw InvalidArgument("channel images must be (N,1,H,W)");
  auto sh = torch::sigmoid(w_h).view({1, 3, 1, 1});
  auto se = torch::sigmoid(w_e).view({1, 3, 1, 1});
  return 1.0 - i_h * sh - i_e * se;
}

NetworkAssembly::NetworkAssembly(const AssemblyOptions& options) : options_(options) {
  options_.generator.validate();
  const int cond = options_.conditional ? options_.generator.in_channels : 0;
  auto critic = [&](int candidate_channels) {
    DiscriminatorSpec s = options_.discriminator;
    s.in_channels = cond + candidate_channels;
    return Discriminator(s);
  };
  if (options_.branches) {
    GeneratorSpec channel = options_.generator;
    g_h = Generator(channel);
    g_e = Generator(channel);
    concat = RgbConcat(options_.concat_init);
    if (options_.use_dhde) {
      d_h = critic(channel.out_channels);
      d_e = critic(channel.out_channels);
    }
  } else {
    GeneratorSpec rgb = options_.generator;
    rgb.out_channels = 3;
    g_single = Generator(rgb);
  }
  if (options_.use_dout) d_out = critic(3);
}

ForwardResult NetworkAssembly::forward(const torch::Tensor& x) {
  ForwardResult r;
  if (!options_.branches) {
    r.i_rgb = (g_single->forward(x) + 1.0) * 0.5;
    return r;
  }
  r.i_h = (g_h->forward(x) + 1.0) * 0.5;
  r.i_e = (g_e->forward(x) + 1.0) * 0.5;
  if (r.i_h.size(1) != 1) {
    // Multi-channel reference configuration: the composition acts on the mean.
    r.i_rgb = concat->forward(r.i_h.mean(1, true), r.i_e.mean(1, true));
  } else {
    r.i_rgb = concat->forward(r.i_h, r.i_e);
  }
  return r;
}

namespace {

void init_module(torch::nn::Module& root) {
  torch::NoGradGuard guard;
  for (auto& m : root.modules(/*include_self=*/true)) {
    if (auto* c = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::normal_(c->weight, 0.0, 0.02);
      if (c->bias.defined()) torch::nn::init::zeros_(c->bias);
    } else if (auto* t = m->as<torch::nn::ConvTranspose2d>()) {
      torch::nn::init::normal_(t->weight, 0.0, 0.02);
      if (t->bias.defined()) torch::nn::init::zeros_(t->bias);
    } else if (auto* b = m->as<torch::nn::BatchNorm2d>()) {
      torch::nn::init::normal_(b->weight, 1.0, 0.02);
      torch::nn::init::zeros_(b->bias);
    }
  }
}

template <typename Holder>
void for_each_present(NetworkAssembly& a, Holder&& fn) {
  if (a.g_h) fn("g_h", *a.g_h);
  if (a.g_e) fn("g_e", *a.g_e);
  if (a.concat) fn("concat", *a.concat);
  if (a.g_single) fn("g_single", *a.g_single);
  if (a.d_h) fn("d_h", *a.d_h);
  if (a.d_e) fn("d_e", *a.d_e);
  if (a.d_out) fn("d_out", *a.d_out);
}

}  // namespace

void NetworkAssembly::initialize(std::uint64_t seed) {
  torch::manual_seed(seed);
  for_each_present(*this, [](const char*, torch::nn::Module& m) { init_module(m); });
}

void NetworkAssembly::train(bool on) {
  for_each_present(*this, [on](const char*, torch::nn::Module& m) { m.train(on); });
}

void NetworkAssembly::to(torch::Dtype dtype) {
  for_each_present(*this, [dtype](const char*, torch::nn::Module& m) { m.to(dtype); });
}

std::vector<std::pair<std::string, torch::Tensor>> NetworkAssembly::named_state() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto& self = const_cast<NetworkAssembly&>(*this);
  for_each_present(self, [&](const char* name, torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) out.emplace_back(std::string(name) + "." + p.key(), p.value());
    for (const auto& b : m.named_buffers()) out.emplace_back(std::string(name) + "." + b.key(), b.value());
  });
  return out;
}

std::vector<std::pair<std::string, torch::Tensor>> NetworkAssembly::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  auto& self = const_cast<NetworkAssembly&>(*this);
  for_each_present(self, [&](const char* name, torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) out.emplace_back(std::string(name) + "." + p.key(), p.value());
  });
  return out;
}

}  // namespace inout
