#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "inout/imagecore.hpp"
#include "inout/model.hpp"
#include "inout/preprocess.hpp"
#include "inout/synthgen.hpp"

namespace inout {

enum class Ablation { None, NoInOut, NoDout, NoDhDe, NoBranches };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct AlphaPolicy {
  bool alternating = true;  ///< alpha = 1 in inner phases, 0 in outer phases
  double fixed = 0.5;       ///< used when not alternating
};

struct TrainingConfig {
  double lambda0 = 100.0;  ///< L1 weight inside every pix2pix objective
  double lambda1 = 50.0;   ///< H-channel L1 weight in the outer objective
  double lambda2 = 50.0;   ///< E-channel L1 weight in the outer objective
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 16;
  int n_alternate = 10;
  int total_epochs = 400;
  AlphaPolicy alpha;
  Ablation ablation = Ablation::None;
  RngSeed seed{0};
  double d_clamp_eps = 1e-7;

  GeneratorSpec generator;
  DiscriminatorSpec discriminator;
  double concat_init = 0.0;

  int checkpoint_every = 0;  ///< epochs between checkpoints; 0 writes only the final one
  int threads = 1;           ///< intra-op threads; results are reproducible per thread count

  void validate() const;
};

nlohmann::ordered_json to_json(const TrainingConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
TrainingConfig training_config_from_json(const nlohmann::json& j);

/// The 1e-4 step size stated alongside the 2e-4 optimizer table.
TrainingConfig with_alternative_learning_rate(TrainingConfig c);

// ---------------------------------------------------------------------------
// Schedule

enum class PhaseKind { Inner, Outer, Joint };
std::string to_string(PhaseKind k);

struct Phase {
  PhaseKind kind = PhaseKind::Inner;
  int first_epoch = 1;  ///< inclusive, 1-based
  int last_epoch = 1;   ///< inclusive
  friend bool operator==(const Phase&, const Phase&) = default;
};

/// Inner, Outer, Inner, ... phases of n_alternate epochs each; the last one
/// is truncated to end at total_epochs.
std::vector<Phase> make_schedule(int n_alternate, int total_epochs);

// ---------------------------------------------------------------------------
// Ablations

struct AblationPlan {
  AssemblyOptions assembly;
  AlphaPolicy alpha;
};

/// none: unchanged; no_inout: fixed alpha 0.5 joint training; no_dout: drop
/// D_out and its adversarial terms; no_dhde: drop D_H/D_E and their terms;
/// no_branches: one generator and one critic mapping the input to RGB.
AblationPlan apply_ablation(const TrainingConfig& config);

// ---------------------------------------------------------------------------
// Losses

/// Tensors of one mini-batch, float32 or float64, NCHW.
struct Batch {
  torch::Tensor x;      ///< (N,1,H,W) input
  torch::Tensor y_h;    ///< (N,1,H,W) H-channel target, optional
  torch::Tensor y_e;    ///< (N,1,H,W) E-channel target, optional
  torch::Tensor y_rgb;  ///< (N,3,H,W) composite target
};

struct LossWeights {
  double lambda0 = 100.0;
  double lambda1 = 50.0;
  double lambda2 = 50.0;
  double eps = 1e-7;
};
LossWeights loss_weights(const TrainingConfig& c);

/// A differentiable objective plus the scalar value of each of its terms.
struct LossTerms {
  torch::Tensor value;
  std::map<std::string, double> parts;
};

struct Pix2PixLoss {
  torch::Tensor generator;      ///< -E[log D(x,G)] + lambda0 * E|y - G|
  torch::Tensor discriminator;  ///< -E[log D(x,y)] - E[log(1 - D(x,G))], G detached
  double gan = 0.0;
  double l1 = 0.0;
};

/// D outputs are clamped to [eps, 1-eps] before every log.
Pix2PixLoss pix2pix_loss(Discriminator& disc, const torch::Tensor& x, const torch::Tensor& generated,
                         const torch::Tensor& target, double lambda0, double eps = 1e-7);

/// Building blocks shared by the objectives and the trainer.
torch::Tensor clamped_log(const torch::Tensor& p, double eps);
torch::Tensor clamped_log1m(const torch::Tensor& p, double eps);
torch::Tensor mean_abs(const torch::Tensor& a, const torch::Tensor& b);

/// Inner objectives on precomputed generator outputs. Terms of absent critics
/// are omitted.
LossTerms inner_generator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                    const LossWeights& w);
LossTerms inner_discriminator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                        const LossWeights& w);
/// Outer objectives. D_H and D_E act as frozen critics: their parameters get
/// no gradient from the outer generator objective.
LossTerms outer_generator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                    const LossWeights& w);
LossTerms outer_discriminator_objective(NetworkAssembly& net, const Batch& b, const ForwardResult& out,
                                        const LossWeights& w);

struct LossBreakdown {
  torch::Tensor generator;
  torch::Tensor discriminator;
  std::map<std::string, double> parts;
};

/// L_in = pix2pix(G_H, D_H; y_h) + pix2pix(G_E, D_E; y_e).
LossBreakdown inner_loss(NetworkAssembly& net, const Batch& b, const LossWeights& w);
/// L_out = pix2pix(G_out, D_out; y) + lambda1|y_h - G_H| + lambda2|y_e - G_E|
///         + E log(1 - D_H(x, G_H)) + E log(1 - D_E(x, G_E)).
LossBreakdown outer_loss(NetworkAssembly& net, const Batch& b, const LossWeights& w);

// ---------------------------------------------------------------------------
// Data

/// Whole-corpus tensors (float32), indexable by sample position.
struct TensorCorpus {
  torch::Tensor x;
  torch::Tensor y_h;
  torch::Tensor y_e;
  torch::Tensor y_rgb;
  std::vector<std::string> ids;

  [[nodiscard]] std::int64_t size() const { return x.defined() ? x.size(0) : 0; }
  [[nodiscard]] Batch batch(const std::vector<std::int64_t>& rows) const;
  [[nodiscard]] Batch all() const;
};

TensorCorpus to_tensors(const std::vector<PairedSample>& samples, const std::vector<SampleRef>& refs);

torch::Tensor to_tensor(const Image2D& img);
torch::Tensor to_tensor(const RgbImage& img);
Image2D image_from_tensor(const torch::Tensor& t);  ///< (1,H,W) or (H,W)
RgbImage rgb_from_tensor(const torch::Tensor& t);   ///< (3,H,W)

/// Mean over images of the mean absolute difference between G_out(x) and y,
/// evaluated with dropout off and running normalization statistics.
double eval_loss(NetworkAssembly& net, const TensorCorpus& data, int batch_size = 16);

// ---------------------------------------------------------------------------
// Training

struct EpochRecord {
  int epoch = 0;
  PhaseKind phase = PhaseKind::Inner;
  double alpha = 1.0;
  std::map<std::string, double> losses;  ///< batch means of every term
  double eval_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  double initial_eval_loss = 0.0;  ///< before the first update
  std::vector<EpochRecord> epochs;
};

nlohmann::ordered_json to_json(const EpochRecord& r);
void write_history(const TrainHistory& h, const std::filesystem::path& path);
TrainHistory read_history(const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path run_dir;  ///< empty: keep everything in memory
  std::function<void(const EpochRecord&)> on_epoch;
  /// Test hook, called after every optimizer round with the phase in force.
  std::function<void(const NetworkAssembly&, PhaseKind)> on_step;
  std::optional<std::filesystem::path> resume_from;
};

struct TrainResult {
  TrainHistory history;
  std::shared_ptr<NetworkAssembly> model;
  std::filesystem::path final_checkpoint;
};

/// Alternating (or fixed-alpha) adversarial training. The train side of the
/// split feeds the optimizers; eval_loss is measured on the test side after
/// every epoch. Throws DivergenceError on any non-finite loss.
TrainResult train(const TensorCorpus& train_set, const TensorCorpus& test_set, const TrainingConfig& config,
                  const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// Checkpoints and inference

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainingConfig config;
  int epoch = 0;
  std::shared_ptr<NetworkAssembly> model;
};

/// Self-describing archive: format tag, version, resolved config (JSON),
/// epoch, torch RNG state, every parameter/buffer and optimizer state.
void save_checkpoint(const std::filesystem::path& path, const TrainingConfig& config, int epoch,
                     const NetworkAssembly& net,
                     const std::map<std::string, torch::optim::Adam*>& optimizers = {});
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::map<std::string, torch::optim::Adam*>& optimizers = {});

struct Stained {
  Image2D i_h;  ///< empty without branches
  Image2D i_e;
  RgbImage i_rgb;  ///< clamped to [0,1]
};

/// Deterministic inference (dropout off). Inputs whose sides are not a
/// multiple of 2^levels are edge-padded symmetrically and cropped back.
std::vector<Stained> infer(NetworkAssembly& net, const std::vector<Image2D>& inputs);
std::vector<Stained> infer(const std::filesystem::path& checkpoint, const std::vector<Image2D>& inputs);

}  // namespace inout
