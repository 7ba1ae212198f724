#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "inout/metrics.hpp"
#include "inout/synthgen.hpp"
#include "inout/training.hpp"
#include "inout/virtual_he.hpp"

namespace inout {

struct PathSettings {
  std::filesystem::path data_dir = "data";
  std::filesystem::path run_dir = "runs/default";
  std::filesystem::path manifest;    ///< empty: <data_dir>/manifest.jsonl
  std::filesystem::path exclusions;  ///< optional id list
  std::filesystem::path calibration; ///< optional frame isolating the interference dot
};

struct CorpusSettings {
  int patients = 8;
  int images_per_patient = 25;
  std::vector<std::string> test_patients{"P07", "P08"};
};

struct PreprocessSettings {
  int smooth_radius = 5;
  double normalize_lo = 1.0;
  double normalize_hi = 99.0;
  double mask_percentile = 99.9;
  double inpaint_tol = 1e-5;
  int inpaint_max_iter = 10000;
};

/// Every knob of an experiment in one JSON document. The master seed feeds
/// the phantom generator and the trainer through derived sub-seeds.
struct RunConfig {
  RngSeed seed{0};
  PathSettings paths;
  PhantomConfig phantom;
  CorpusSettings corpus;
  StainCoefficients stain;
  PreprocessSettings preprocess;
  TrainingConfig training;
  std::vector<int> sweep_n{10, 50, 200};
  int audit_input_size = 256;

  /// Applies the master seed to the phantom and training sections.
  void resolve_seeds();
  void validate() const;
  [[nodiscard]] std::filesystem::path manifest_path() const;
};

/// The compact default used for desk-scale runs: 128x128 phantoms, six-level
/// 16-wide generators, 60 epochs.
RunConfig desk_run_config();

nlohmann::ordered_json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Reads a config file and applies path overrides from the environment
/// (INOUT_DATA_DIR, INOUT_RUN_DIR, INOUT_MANIFEST). Throws ConfigError naming
/// the path when it is missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes config.resolved.json and provenance.json (seed, version tag,
/// command) into the run directory.
void write_run_record(const RunConfig& c, const std::filesystem::path& run_dir, const std::string& command);

std::string version_tag();

// ---------------------------------------------------------------------------
// Pipeline steps shared by the command surface and the tests

/// Writes rcm/h/e TIFFs, rgb PNGs, masks and manifest.jsonl into dir.
std::vector<ManifestEntry> write_corpus(const std::vector<PairedSample>& samples, const std::filesystem::path& dir);
/// Loads every manifest entry; channel targets and masks are optional.
std::vector<PairedSample> load_corpus(const std::filesystem::path& manifest);

/// Fills each sample's artifact footprint (its own mask, else the shared one)
/// by harmonic inpainting.
std::vector<PairedSample> remove_artifacts(std::vector<PairedSample> samples, const PreprocessSettings& p,
                                           const ArtifactMask* shared_mask = nullptr);

struct PreparedData {
  DatasetSplit split;
  TensorCorpus train;
  TensorCorpus test;
  std::vector<PairedSample> samples;
};

PreparedData prepare_data(std::vector<PairedSample> samples, const std::vector<std::string>& test_patients);

/// Test-side predictions of a trained model, keyed by sample id.
std::vector<NamedRgb> predict(NetworkAssembly& net, const PreparedData& data);
std::vector<NamedRgb> targets(const PreparedData& data);

struct AblationRun {
  std::string tag;  ///< full, ablation1 .. ablation4
  Ablation ablation = Ablation::None;
  TrainHistory history;
  MetricReport report;
  ParamReport params;
};

/// The full model plus the four ablations, each trained from the same seed
/// into run_dir/<tag>, evaluated on the test split, and summarised in
/// run_dir/ablation_table.tsv.
std::vector<AblationRun> run_ablation_study(const RunConfig& c, const PreparedData& data,
                                            const std::filesystem::path& run_dir);

struct SweepRun {
  int n = 0;
  TrainHistory history;
};

/// One training per n; histories in run_dir/n_<n>/ plus run_dir/curves.tsv.
std::vector<SweepRun> run_schedule_sweep(const RunConfig& c, const PreparedData& data, const std::vector<int>& n_values,
                                         const std::filesystem::path& run_dir);

/// Whole command surface. Exit codes: 0 success, 1 usage, 2 configuration,
/// 3 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace inout
