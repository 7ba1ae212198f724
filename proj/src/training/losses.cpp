#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {
namespace {

double scalar(const torch::Tensor& t) { return t.detach().item<double>(); }

/// Parameters of a frozen critic stop collecting gradients while in scope.
class FreezeGuard {
 public:
  explicit FreezeGuard(torch::nn::Module* m) {
    if (m == nullptr) return;
    for (auto& p : m->parameters()) {
      if (p.requires_grad()) {
        p.requires_grad_(false);
        frozen_.push_back(p);
      }
    }
  }
  ~FreezeGuard() {
    for (auto& p : frozen_) p.requires_grad_(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<torch::Tensor> frozen_;
};

torch::Tensor condition_of(const NetworkAssembly& net, const torch::Tensor& x) {
  return net.options().conditional ? x : torch::Tensor();
}

void require_channels(const Batch& b) {
  if (!b.y_h.defined() || !b.y_e.defined()) throw InvalidArgument("batch lacks H/E channel targets");
}

torch::Tensor zero_like(const torch::Tensor& x) { return torch::zeros({}, x.options()); }

}  // namespace

torch::Tensor clamped_log(const torch::Tensor& p, double eps) { return torch::log(p.clamp(eps, 1.0 - eps)); }

torch::Tensor clamped_log1m(const torch::Tensor& p, double eps) {
  return torch::log(1.0 - p.clamp(eps, 1.0 - eps));
}

torch::Tensor mean_abs(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).abs().mean(); }

Pix2PixLoss pix2pix_loss(Discriminator& disc, const torch::Tensor& x, const torch::Tensor& generated,
                         const torch::Tensor& target, double lambda0, double eps) {
  if (generated.sizes() != target.sizes()) throw InvalidArgument("generated and target shapes differ");
  if (!torch::isfinite(generated).all().item<bool>() || !torch::isfinite(target).all().item<bool>() ||
      !torch::isfinite(x).all().item<bool>()) {
    throw InvalidArgument("non-finite input to pix2pix loss");
  }
  Pix2PixLoss r;
  const auto gan = -clamped_log(disc->forward(x, generated), eps).mean();
  const auto l1 = mean_abs(target, generated);
  r.generator = gan + lambda0 * l1;
  r.discriminator = -clamped_log(disc->forward(x, target), eps).mean() -
                    clamped_log1m(disc->forward(x, generated.detach()), eps).mean();
  r.gan = scalar(gan);
  r.l1 = scalar(l1);
  return r;
}

LossTerms inner_generator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                    const LossWeights& w) {
  require_channels(b);
  if (!out.i_h.defined()) throw InvalidArgument("inner objective needs the channel branches");
  LossTerms t;
  const auto cond = condition_of(net, b.x);
  const auto l1_h = mean_abs(b.y_h, out.i_h);
  const auto l1_e = mean_abs(b.y_e, out.i_e);
  t.value = w.lambda0 * (l1_h + l1_e);
  t.parts["in.l1_h"] = scalar(l1_h);
  t.parts["in.l1_e"] = scalar(l1_e);
  if (net.d_h) {
    const auto gan_h = -clamped_log(net.d_h->forward(cond, out.i_h), w.eps).mean();
    const auto gan_e = -clamped_log(net.d_e->forward(cond, out.i_e), w.eps).mean();
    t.value = t.value + gan_h + gan_e;
    t.parts["in.gan_h"] = scalar(gan_h);
    t.parts["in.gan_e"] = scalar(gan_e);
  }
  return t;
}

LossTerms inner_discriminator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                        const LossWeights& w) {
  require_channels(b);
  LossTerms t;
  t.value = zero_like(b.x);
  if (!net.d_h) return t;
  const auto cond = condition_of(net, b.x);
  const auto d_h = -clamped_log(net.d_h->forward(cond, b.y_h), w.eps).mean() -
                   clamped_log1m(net.d_h->forward(cond, out.i_h.detach()), w.eps).mean();
  const auto d_e = -clamped_log(net.d_e->forward(cond, b.y_e), w.eps).mean() -
                   clamped_log1m(net.d_e->forward(cond, out.i_e.detach()), w.eps).mean();
  t.value = d_h + d_e;
  t.parts["in.d_h"] = scalar(d_h);
  t.parts["in.d_e"] = scalar(d_e);
  return t;
}

LossTerms outer_generator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                    const LossWeights& w) {
  LossTerms t;
  const auto cond = condition_of(net, b.x);
  const auto l1 = mean_abs(b.y_rgb, out.i_rgb);
  t.value = w.lambda0 * l1;
  t.parts["out.l1"] = scalar(l1);
  if (net.d_out) {
    const auto gan = -clamped_log(net.d_out->forward(cond, out.i_rgb), w.eps).mean();
    t.value = t.value + gan;
    t.parts["out.gan"] = scalar(gan);
  }
  if (out.i_h.defined()) {
    require_channels(b);
    const auto l1_h = mean_abs(b.y_h, out.i_h);
    const auto l1_e = mean_abs(b.y_e, out.i_e);
    t.value = t.value + w.lambda1 * l1_h + w.lambda2 * l1_e;
    t.parts["out.l1_h"] = scalar(l1_h);
    t.parts["out.l1_e"] = scalar(l1_e);
    if (net.d_h) {
      FreezeGuard fh(net.d_h.ptr().get());
      FreezeGuard fe(net.d_e.ptr().get());
      const auto frozen_h = clamped_log1m(net.d_h->forward(cond, out.i_h), w.eps).mean();
      const auto frozen_e = clamped_log1m(net.d_e->forward(cond, out.i_e), w.eps).mean();
      t.value = t.value + frozen_h + frozen_e;
      t.parts["out.frozen_h"] = scalar(frozen_h);
      t.parts["out.frozen_e"] = scalar(frozen_e);
    }
  }
  return t;
}

LossTerms outer_discriminator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                        const LossWeights& w) {
  LossTerms t;
  t.value = zero_like(b.x);
  if (!net.d_out) return t;
  const auto cond = condition_of(net, b.x);
  const auto d = -clamped_log(net.d_out->forward(cond, b.y_rgb), w.eps).mean() -
                 clamped_log1m(net.d_out->forward(cond, out.i_rgb.detach()), w.eps).mean();
  t.value = d;
  t.parts["out.d_out"] = scalar(d);
  return t;
}

namespace {

LossBreakdown combine(const LossTerms& g, const LossTerms& d) {
  LossBreakdown r{g.value, d.value, g.parts};
  r.parts.insert(d.parts.begin(), d.parts.end());
  return r;
}

}  // namespace

LossBreakdown inner_loss(NetworkAssembly& net, const Batch& b, const LossWeights& w) {
  require_channels(b);
  const auto out = net.forward(b.x);
  return combine(inner_generator_objective(net, b, out, w), inner_discriminator_objective(net, b, out, w));
}

LossBreakdown outer_loss(NetworkAssembly& net, const Batch& b, const LossWeights& w) {
  if (!b.y_rgb.defined()) throw InvalidArgument("batch lacks the composite target");
  const auto out = net.forward(b.x);
  return combine(outer_generator_objective(net, b, out, w), outer_discriminator_objective(net, b, out, w));
}

}  // namespace inout
