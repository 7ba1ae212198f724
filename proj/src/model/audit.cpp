#include "inout/model.hpp"

namespace inout {

std::int64_t count_parameters(torch::nn::Module& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

ParamReport audit_params(const NetworkAssembly& assembly, int input_size) {
  auto& a = const_cast<NetworkAssembly&>(assembly);
  ParamReport r;
  if (a.g_h) r.g_h = count_parameters(*a.g_h);
  if (a.g_e) r.g_e = count_parameters(*a.g_e);
  if (a.concat) r.concat = count_parameters(*a.concat);
  if (a.g_single) r.g_single = count_parameters(*a.g_single);
  if (a.d_h) r.d_h = count_parameters(*a.d_h);
  if (a.d_e) r.d_e = count_parameters(*a.d_e);
  if (a.d_out) r.d_out = count_parameters(*a.d_out);
  r.generator_total = r.g_h + r.g_e + r.concat + r.g_single;
  r.discriminator_total = r.d_h + r.d_e + r.d_out;
  r.total = r.generator_total + r.discriminator_total;
  if (a.g_single) {
    r.inference_macs = a.g_single->macs(input_size, input_size);
  } else {
    r.inference_macs = a.g_h->macs(input_size, input_size) + a.g_e->macs(input_size, input_size) +
                       static_cast<std::int64_t>(input_size) * input_size * 6;
  }
  return r;
}

AssemblyOptions reference_options() {
  AssemblyOptions o;
  o.generator.in_channels = 3;
  o.generator.out_channels = 3;
  o.generator.levels = 8;
  o.generator.base_width = 64;
  o.discriminator.base_width = 64;
  o.discriminator.layout = DiscriminatorLayout::Patch;
  o.discriminator.strided_layers = 3;
  return o;
}

}  // namespace inout
