#include <cstdlib>
#include <fstream>
#include <set>

#include "inout/cli.hpp"
#include "inout/errors.hpp"

#ifndef INOUT_VERSION_TAG
#define INOUT_VERSION_TAG "unknown"
#endif

namespace inout {

std::string version_tag() { return INOUT_VERSION_TAG; }

void RunConfig::resolve_seeds() {
  phantom.seed = derive_seed(seed, "synth");
  training.seed = derive_seed(seed, "train");
}

void RunConfig::validate() const {
  try {
    phantom.validate();
    stain.validate();
    training.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (corpus.patients < 2) throw ConfigError("corpus.patients must be >= 2");
  if (corpus.images_per_patient < 1) throw ConfigError("corpus.images_per_patient must be >= 1");
  if (corpus.test_patients.empty()) throw ConfigError("corpus.test_patients is empty");
  if (preprocess.smooth_radius < 0) throw ConfigError("preprocess.smooth_radius must be >= 0");
  if (!(preprocess.normalize_lo >= 0 && preprocess.normalize_lo < preprocess.normalize_hi &&
        preprocess.normalize_hi <= 100))
    throw ConfigError("preprocess normalization percentiles must satisfy 0 <= lo < hi <= 100");
  if (!(preprocess.mask_percentile > 0 && preprocess.mask_percentile <= 100))
    throw ConfigError("preprocess.mask_percentile outside (0,100]");
  if (!(preprocess.inpaint_tol > 0) || preprocess.inpaint_max_iter < 1)
    throw ConfigError("inpainting tolerance and iteration cap must be positive");
  for (int n : sweep_n)
    if (n < 1) throw ConfigError("sweep n values must be >= 1");
  if (audit_input_size < 1) throw ConfigError("audit input_size must be positive");
}

std::filesystem::path RunConfig::manifest_path() const {
  return paths.manifest.empty() ? paths.data_dir / "manifest.jsonl" : paths.manifest;
}

RunConfig desk_run_config() {
  RunConfig c;
  c.phantom.image_size = 128;
  c.corpus.patients = 8;
  c.corpus.images_per_patient = 25;
  c.corpus.test_patients = {"P07", "P08"};
  c.training.generator.levels = 6;
  c.training.generator.base_width = 16;
  c.training.discriminator.base_width = 16;
  c.training.total_epochs = 60;
  c.training.n_alternate = 10;
  c.training.batch_size = 16;
  c.sweep_n = {10, 30};
  c.audit_input_size = 128;
  c.resolve_seeds();
  return c;
}

namespace {

using ojson = nlohmann::ordered_json;

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& into, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + where + "." + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed.value;
  j["paths"] = {{"data_dir", c.paths.data_dir.string()},
                {"run_dir", c.paths.run_dir.string()},
                {"manifest", c.paths.manifest.string()},
                {"exclusions", c.paths.exclusions.string()},
                {"calibration", c.paths.calibration.string()}};
  const auto& p = c.phantom;
  j["phantom"] = {{"image_size", p.image_size},         {"nuclei_min", p.nuclei_min},
                  {"nuclei_max", p.nuclei_max},         {"radius_min", p.radius_min},
                  {"radius_max", p.radius_max},         {"texture_cutoff", p.texture_cutoff},
                  {"envelope_cutoff", p.envelope_cutoff}, {"rcm_mix_nuclei", p.rcm_mix_nuclei},
                  {"rcm_mix_cyto", p.rcm_mix_cyto},     {"speckle_strength", p.speckle_strength},
                  {"speckle_shape", p.speckle_shape},   {"artifact_enabled", p.artifact_enabled}};
  j["corpus"] = {{"patients", c.corpus.patients},
                 {"images_per_patient", c.corpus.images_per_patient},
                 {"test_patients", c.corpus.test_patients}};
  j["stain"] = {{"k_h", c.stain.k_h}, {"k_e", c.stain.k_e}};
  const auto& pp = c.preprocess;
  j["preprocess"] = {{"smooth_radius", pp.smooth_radius},     {"normalize_lo", pp.normalize_lo},
                     {"normalize_hi", pp.normalize_hi},       {"mask_percentile", pp.mask_percentile},
                     {"inpaint_tol", pp.inpaint_tol},         {"inpaint_max_iter", pp.inpaint_max_iter}};
  auto t = to_json(c.training);
  t.erase("seed");
  j["training"] = t;
  j["sweep"] = {{"n_values", c.sweep_n}};
  j["audit"] = {{"input_size", c.audit_input_size}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& user) {
  reject_unknown(user, {"preset", "seed", "paths", "phantom", "corpus", "stain", "preprocess", "training", "sweep", "audit"},
                 "config");
  RunConfig c;
  if (user.contains("preset")) {
    const auto& preset = user.at("preset");
    if (preset == "desk") {
      c = desk_run_config();
    } else if (preset != "default") {
      throw ConfigError("unknown preset " + preset.dump() + " (default|desk)");
    }
  }
  if (user.contains("training") && user.at("training").is_object() && user.at("training").contains("seed"))
    throw ConfigError("the seed is set once at the top level, not in 'training'");

  nlohmann::json j = to_json(c);
  nlohmann::json patch = user;
  patch.erase("preset");
  j.merge_patch(patch);

  read(j, "seed", c.seed.value, "config");
  const auto& paths = j.at("paths");
  reject_unknown(paths, {"data_dir", "run_dir", "manifest", "exclusions", "calibration"}, "paths");
  auto path_of = [&](const char* key) {
    std::string v;
    read(paths, key, v, "paths");
    return std::filesystem::path(v);
  };
  c.paths.data_dir = path_of("data_dir");
  c.paths.run_dir = path_of("run_dir");
  c.paths.manifest = path_of("manifest");
  c.paths.exclusions = path_of("exclusions");
  c.paths.calibration = path_of("calibration");

  const auto& p = j.at("phantom");
  reject_unknown(p,
                 {"image_size", "nuclei_min", "nuclei_max", "radius_min", "radius_max", "texture_cutoff",
                  "envelope_cutoff", "rcm_mix_nuclei", "rcm_mix_cyto", "speckle_strength", "speckle_shape",
                  "artifact_enabled"},
                 "phantom");
  read(p, "image_size", c.phantom.image_size, "phantom");
  read(p, "nuclei_min", c.phantom.nuclei_min, "phantom");
  read(p, "nuclei_max", c.phantom.nuclei_max, "phantom");
  read(p, "radius_min", c.phantom.radius_min, "phantom");
  read(p, "radius_max", c.phantom.radius_max, "phantom");
  read(p, "texture_cutoff", c.phantom.texture_cutoff, "phantom");
  read(p, "envelope_cutoff", c.phantom.envelope_cutoff, "phantom");
  read(p, "rcm_mix_nuclei", c.phantom.rcm_mix_nuclei, "phantom");
  read(p, "rcm_mix_cyto", c.phantom.rcm_mix_cyto, "phantom");
  read(p, "speckle_strength", c.phantom.speckle_strength, "phantom");
  read(p, "speckle_shape", c.phantom.speckle_shape, "phantom");
  read(p, "artifact_enabled", c.phantom.artifact_enabled, "phantom");

  const auto& co = j.at("corpus");
  reject_unknown(co, {"patients", "images_per_patient", "test_patients"}, "corpus");
  read(co, "patients", c.corpus.patients, "corpus");
  read(co, "images_per_patient", c.corpus.images_per_patient, "corpus");
  read(co, "test_patients", c.corpus.test_patients, "corpus");

  const auto& st = j.at("stain");
  reject_unknown(st, {"k_h", "k_e"}, "stain");
  read(st, "k_h", c.stain.k_h, "stain");
  read(st, "k_e", c.stain.k_e, "stain");

  const auto& pp = j.at("preprocess");
  reject_unknown(pp, {"smooth_radius", "normalize_lo", "normalize_hi", "mask_percentile", "inpaint_tol", "inpaint_max_iter"},
                 "preprocess");
  read(pp, "smooth_radius", c.preprocess.smooth_radius, "preprocess");
  read(pp, "normalize_lo", c.preprocess.normalize_lo, "preprocess");
  read(pp, "normalize_hi", c.preprocess.normalize_hi, "preprocess");
  read(pp, "mask_percentile", c.preprocess.mask_percentile, "preprocess");
  read(pp, "inpaint_tol", c.preprocess.inpaint_tol, "preprocess");
  read(pp, "inpaint_max_iter", c.preprocess.inpaint_max_iter, "preprocess");

  c.training = training_config_from_json(j.at("training"));

  const auto& sw = j.at("sweep");
  reject_unknown(sw, {"n_values"}, "sweep");
  read(sw, "n_values", c.sweep_n, "sweep");
  const auto& au = j.at("audit");
  reject_unknown(au, {"input_size"}, "audit");
  read(au, "input_size", c.audit_input_size, "audit");

  c.resolve_seeds();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file " + path.string() + ": " + e.what());
  }
  RunConfig c = run_config_from_json(j);
  if (const char* v = std::getenv("INOUT_DATA_DIR"); v && *v) c.paths.data_dir = v;
  if (const char* v = std::getenv("INOUT_RUN_DIR"); v && *v) c.paths.run_dir = v;
  if (const char* v = std::getenv("INOUT_MANIFEST"); v && *v) c.paths.manifest = v;
  return c;
}

void write_run_record(const RunConfig& c, const std::filesystem::path& run_dir, const std::string& command) {
  std::filesystem::create_directories(run_dir);
  std::ofstream cfg(run_dir / "config.resolved.json");
  if (!cfg) throw IoError("cannot write into " + run_dir.string());
  cfg << to_json(c).dump(2) << '\n';
  ojson prov;
  prov["command"] = command;
  prov["version"] = version_tag();
  prov["seed"] = c.seed.value;
  prov["training_seed"] = c.training.seed.value;
  prov["phantom_seed"] = c.phantom.seed.value;
  prov["threads"] = c.training.threads;
  std::ofstream(run_dir / "provenance.json") << prov.dump(2) << '\n';
}

}  // namespace inout
