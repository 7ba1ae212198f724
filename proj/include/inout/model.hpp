#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace inout {

enum class NormKind { Batch, Instance, None };

std::string to_string(NormKind k);
NormKind norm_kind_from_string(const std::string& s);

/// U-Net generator description. Feature widths are base_width * min(2^k, 8)
/// at encoder level k.
struct GeneratorSpec {
  int in_channels = 1;
  int out_channels = 1;
  int levels = 8;
  int base_width = 64;
  /// Number of decoder levels directly above the bottleneck that apply
  /// dropout (pix2pix uses three).
  int dropout_levels = 3;
  double dropout_rate = 0.5;
  NormKind norm = NormKind::Batch;

  void validate() const;
  [[nodiscard]] int width_at(int level) const;
  [[nodiscard]] bool dropout_at(int level) const;
};

enum class DiscriminatorLayout {
  /// Strided 4x4 convolutions followed by a valid 4x4 convolution; the
  /// remaining logit map is averaged into one probability per image.
  Global,
  /// pix2pix PatchGAN: strided convolutions, one stride-1 widening
  /// convolution, and a stride-1 output convolution; one probability per patch.
  Patch,
};

std::string to_string(DiscriminatorLayout l);
DiscriminatorLayout discriminator_layout_from_string(const std::string& s);

struct DiscriminatorSpec {
  int in_channels = 2;  ///< condition channels + candidate channels
  int base_width = 64;
  int strided_layers = 5;
  DiscriminatorLayout layout = DiscriminatorLayout::Global;
  NormKind norm = NormKind::Batch;

  void validate() const;
  /// Smallest square input the layout can process.
  [[nodiscard]] int min_input_size() const;
};

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(GeneratorSpec spec);

  /// tanh output in (-1, 1), same spatial size as the input.
  torch::Tensor forward(const torch::Tensor& x);

  [[nodiscard]] const GeneratorSpec& spec() const { return spec_; }
  /// Multiply-accumulate count of one forward pass at the given size.
  [[nodiscard]] std::int64_t macs(int height, int width) const;

 private:
  GeneratorSpec spec_;
  std::vector<torch::nn::Conv2d> down_;
  std::vector<torch::nn::AnyModule> down_norm_;
  std::vector<torch::nn::ConvTranspose2d> up_;
  std::vector<torch::nn::AnyModule> up_norm_;
  std::vector<torch::nn::Dropout> dropout_;
};
TORCH_MODULE(Generator);

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(DiscriminatorSpec spec);

  /// Probability that `candidate` is a real image given `condition`:
  /// shape (N,1,1,1) for the global layout, (N,1,h,w) for patches.
  torch::Tensor forward(const torch::Tensor& condition, const torch::Tensor& candidate);
  torch::Tensor logits(const torch::Tensor& input);

  [[nodiscard]] const DiscriminatorSpec& spec() const { return spec_; }
  [[nodiscard]] std::int64_t macs(int height, int width) const;

 private:
  DiscriminatorSpec spec_;
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Trainable colour composition: out(c) = 1 - I_H*sigmoid(W_H[c]) - I_E*sigmoid(W_E[c]).
class RgbConcatImpl : public torch::nn::Module {
 public:
  explicit RgbConcatImpl(double init = 0.0);

  /// i_h, i_e: (N,1,H,W) -> (N,3,H,W), unclamped.
  torch::Tensor forward(const torch::Tensor& i_h, const torch::Tensor& i_e);

  torch::Tensor w_h;
  torch::Tensor w_e;
};
TORCH_MODULE(RgbConcat);

/// Which parts of the network exist. Ablations remove components; the
/// single-branch variant replaces both generators and the composition layer
/// by one generator mapping the input straight to RGB.
struct AssemblyOptions {
  GeneratorSpec generator;
  DiscriminatorSpec discriminator;  ///< in_channels is derived per critic
  bool branches = true;
  bool use_dhde = true;
  bool use_dout = true;
  double concat_init = 0.0;
  bool conditional = true;  ///< critics see the condition image too
};

struct ForwardResult {
  torch::Tensor i_h;  ///< undefined without branches
  torch::Tensor i_e;
  torch::Tensor i_rgb;
};

class NetworkAssembly {
 public:
  explicit NetworkAssembly(const AssemblyOptions& options);

  /// Channel outputs remapped to [0,1] via (t+1)/2 and their composite.
  ForwardResult forward(const torch::Tensor& x);

  /// Applies pix2pix initialisation (N(0,0.02) convolutions, N(1,0.02)
  /// norm scales) under the given torch seed.
  void initialize(std::uint64_t seed);
  void train(bool on = true);
  void eval() { train(false); }
  void to(torch::Dtype dtype);

  /// Every parameter and buffer under a stable dotted name.
  [[nodiscard]] std::vector<std::pair<std::string, torch::Tensor>> named_state() const;
  [[nodiscard]] std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;

  [[nodiscard]] const AssemblyOptions& options() const { return options_; }

  Generator g_h{nullptr};
  Generator g_e{nullptr};
  RgbConcat concat{nullptr};
  Generator g_single{nullptr};  ///< only without branches
  Discriminator d_h{nullptr};
  Discriminator d_e{nullptr};
  Discriminator d_out{nullptr};

 private:
  AssemblyOptions options_;
};

std::int64_t count_parameters(torch::nn::Module& m);

struct ParamReport {
  std::int64_t g_h = 0;
  std::int64_t g_e = 0;
  std::int64_t concat = 0;
  std::int64_t g_single = 0;
  std::int64_t d_h = 0;
  std::int64_t d_e = 0;
  std::int64_t d_out = 0;
  std::int64_t generator_total = 0;  ///< everything that produces the output image
  std::int64_t discriminator_total = 0;
  std::int64_t total = 0;
  std::int64_t inference_macs = 0;  ///< at the audit input size
};

ParamReport audit_params(const NetworkAssembly& assembly, int input_size = 256);

/// The 3-channel, 8-level, 64-wide configuration with PatchGAN critics used
/// for the full-size parameter audit.
AssemblyOptions reference_options();

}  // namespace inout
