#include "inout/errors.hpp"
#include "inout/training.hpp"

namespace inout {

namespace {

torch::Dtype net_dtype(const NetworkAssembly& net) {
  auto params = net.named_parameters();
  return params.empty() ? torch::kFloat32 : params.front().second.scalar_type();
}

}  // namespace

torch::Tensor to_tensor(const Image2D& img) {
  auto t = torch::empty({1, img.height, img.width}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t k = 0; k < img.size(); ++k) p[k] = static_cast<float>(img.values[k]);
  return t;
}

torch::Tensor to_tensor(const RgbImage& img) {
  auto t = torch::empty({3, img.height, img.width}, torch::kFloat32);
  auto* p = t.data_ptr<float>();
  for (std::size_t k = 0; k < img.values.size(); ++k) p[k] = static_cast<float>(img.values[k]);
  return t;
}

Image2D image_from_tensor(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  if (c.dim() == 3) c = c.squeeze(0);
  if (c.dim() != 2) throw InvalidArgument("expected a (1,H,W) or (H,W) tensor");
  Image2D img(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)));
  std::copy(c.data_ptr<double>(), c.data_ptr<double>() + c.numel(), img.values.begin());
  return img;
}

RgbImage rgb_from_tensor(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  if (c.dim() != 3 || c.size(0) != 3) throw InvalidArgument("expected a (3,H,W) tensor");
  RgbImage img(static_cast<int>(c.size(1)), static_cast<int>(c.size(2)));
  std::copy(c.data_ptr<double>(), c.data_ptr<double>() + c.numel(), img.values.begin());
  return img;
}

Batch TensorCorpus::batch(const std::vector<std::int64_t>& rows) const {
  auto idx = torch::tensor(rows, torch::kLong);
  Batch b;
  b.x = x.index_select(0, idx);
  if (y_h.defined()) b.y_h = y_h.index_select(0, idx);
  if (y_e.defined()) b.y_e = y_e.index_select(0, idx);
  if (y_rgb.defined()) b.y_rgb = y_rgb.index_select(0, idx);
  return b;
}

Batch TensorCorpus::all() const { return {x, y_h, y_e, y_rgb}; }

TensorCorpus to_tensors(const std::vector<PairedSample>& samples, const std::vector<SampleRef>& refs) {
  TensorCorpus c;
  if (refs.empty()) return c;
  std::vector<torch::Tensor> xs, hs, es, rgbs;
  for (const auto& r : refs) {
    const auto& s = samples.at(r.index);
    xs.push_back(to_tensor(s.rcm));
    hs.push_back(to_tensor(s.h_target));
    es.push_back(to_tensor(s.e_target));
    rgbs.push_back(to_tensor(s.rgb_target));
    c.ids.push_back(s.id);
  }
  c.x = torch::stack(xs);
  c.y_h = torch::stack(hs);
  c.y_e = torch::stack(es);
  c.y_rgb = torch::stack(rgbs);
  return c;
}

double eval_loss(NetworkAssembly& net, const TensorCorpus& data, int batch_size) {
  if (data.size() == 0) throw InvalidArgument("eval_loss on an empty dataset");
  if (!data.y_rgb.defined()) throw InvalidArgument("eval_loss needs composite targets");
  torch::NoGradGuard guard;
  net.eval();
  double total = 0.0;
  for (std::int64_t start = 0; start < data.size(); start += batch_size) {
    const auto len = std::min<std::int64_t>(batch_size, data.size() - start);
    auto x = data.x.narrow(0, start, len);
    auto y = data.y_rgb.narrow(0, start, len);
    auto pred = net.forward(x.to(net_dtype(net))).i_rgb.to(torch::kFloat64);
    total += (pred - y.to(torch::kFloat64)).abs().mean({1, 2, 3}).sum().item<double>();
  }
  return total / static_cast<double>(data.size());
}

namespace {

int pad_multiple(const NetworkAssembly& net) { return 1 << net.options().generator.levels; }

}  // namespace

std::vector<Stained> infer(NetworkAssembly& net, const std::vector<Image2D>& inputs) {
  torch::NoGradGuard guard;
  net.eval();
  const int m = pad_multiple(net);
  std::vector<Stained> out;
  for (const auto& img : inputs) {
    const int ph = (m - img.height % m) % m;
    const int pw = (m - img.width % m) % m;
    auto x = to_tensor(img).unsqueeze(0).to(net_dtype(net));
    if (ph > 0 || pw > 0) {
      x = torch::nn::functional::pad(
          x, torch::nn::functional::PadFuncOptions({pw / 2, pw - pw / 2, ph / 2, ph - ph / 2})
                 .mode(torch::kReplicate));
    }
    auto r = net.forward(x);
    auto crop = [&](const torch::Tensor& t) {
      return t.squeeze(0).narrow(1, ph / 2, img.height).narrow(2, pw / 2, img.width);
    };
    Stained s;
    if (r.i_h.defined()) {
      s.i_h = image_from_tensor(crop(r.i_h).mean(0, true));
      s.i_e = image_from_tensor(crop(r.i_e).mean(0, true));
    }
    s.i_rgb = rgb_from_tensor(crop(r.i_rgb).clamp(0.0, 1.0));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Stained> infer(const std::filesystem::path& checkpoint, const std::vector<Image2D>& inputs) {
  auto ck = load_checkpoint(checkpoint);
  return infer(*ck.model, inputs);
}

}  // namespace inout
