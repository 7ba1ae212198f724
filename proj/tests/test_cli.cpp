#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include "inout/cli.hpp"
#include "inout/errors.hpp"
#include "test_util.hpp"

using namespace inout;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "inoutnet");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

nlohmann::json tiny_json() {
  return {{"seed", 3},
          {"phantom", {{"image_size", 32}, {"nuclei_min", 2}, {"nuclei_max", 4}, {"radius_min", 2.0}, {"radius_max", 3.0}}},
          {"corpus", {{"patients", 2}, {"images_per_patient", 3}, {"test_patients", {"P02"}}}},
          {"training",
           {{"total_epochs", 2},
            {"batch_size", 2},
            {"n_alternate", 1},
            {"generator", {{"levels", 5}, {"base_width", 4}, {"dropout_levels", 2}}},
            {"discriminator", {{"base_width", 4}, {"strided_layers", 3}}}}},
          {"audit", {{"input_size", 32}}}};
}

fs::path write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_CASE("run config defaults, presets and strict parsing") {
  const auto c = run_config_from_json(nlohmann::json::object());
  CHECK(c.training.total_epochs == 400);
  CHECK(c.training.lambda0 == 100.0);
  CHECK(c.training.learning_rate == 2e-4);
  CHECK(c.training.n_alternate == 10);
  CHECK(c.training.seed.value == derive_seed(c.seed, "train").value);
  CHECK(c.phantom.seed.value == derive_seed(c.seed, "synth").value);

  const auto desk = run_config_from_json({{"preset", "desk"}, {"seed", 9}});
  CHECK(desk.training.generator.levels == 6);
  CHECK(desk.training.total_epochs == 60);
  CHECK(desk.training.seed.value == derive_seed(RngSeed{9}, "train").value);

  const auto patched = run_config_from_json({{"preset", "desk"}, {"training", {{"total_epochs", 5}}}});
  CHECK(patched.training.total_epochs == 5);
  CHECK(patched.training.generator.base_width == 16);

  const auto round = run_config_from_json(to_json(desk));
  CHECK(to_json(round) == to_json(desk));

  CHECK_THROWS_AS(run_config_from_json({{"sede", 1}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"phantom", {{"size", 4}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"preset", "huge"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"training", {{"seed", 4}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"corpus", {{"patients", 1}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"preprocess", {{"normalize_lo", 99}, {"normalize_hi", 1}}}}), ConfigError);
}

TEST_CASE("config files: missing, malformed and environment overrides") {
  testutil::TempDir dir;
  CHECK_THROWS_AS(load_run_config(dir.path / "nope.json"), ConfigError);
  std::ofstream(dir.path / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config(dir.path / "bad.json"), ConfigError);

  const auto path = write_json(dir.path / "ok.json", tiny_json());
  ::setenv("INOUT_RUN_DIR", (dir.path / "env_run").c_str(), 1);
  const auto c = load_run_config(path);
  ::unsetenv("INOUT_RUN_DIR");
  CHECK(c.paths.run_dir == dir.path / "env_run");
}

TEST_CASE("command surface exit codes") {
  testutil::TempDir dir;
  CHECK(cli({"synth", "-c", (dir.path / "missing.json").string()}) == 2);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({}) == 1);
  CHECK(cli({"--help"}) == 0);
  const auto bad = write_json(dir.path / "bad.json", {{"trainig", {}}});
  CHECK(cli({"audit", "-c", bad.string()}) == 2);
  const auto cfg = write_json(dir.path / "cfg.json", tiny_json());
  CHECK(cli({"train", "-c", cfg.string(), "--ablation", "no_everything"}) == 1);
  CHECK(cli({"infer", "-k", (dir.path / "none.pt").string(), "-i", "x.tif", "-o", dir.path.string()}) == 3);
}

TEST_CASE("audit writes the parameter report") {
  testutil::TempDir dir;
  const auto cfg = write_json(dir.path / "cfg.json", tiny_json());
  REQUIRE(cli({"audit", "-c", cfg.string(), "-o", (dir.path / "audit.json").string()}) == 0);
  const auto j = read_json(dir.path / "audit.json");
  CHECK(j.at("reference").at("g_h").get<std::int64_t>() == 54413955);
  CHECK(j.at("configured_input_size") == 32);
  CHECK(j.contains("reference_single_branch"));
}

TEST_CASE("end-to-end pipeline on a tiny corpus") {
  testutil::TempDir dir;
  const auto cfg = write_json(dir.path / "cfg.json", tiny_json());
  const auto data = dir.path / "data";
  REQUIRE(cli({"synth", "-c", cfg.string(), "-o", data.string()}) == 0);
  const auto manifest = data / "manifest.jsonl";
  REQUIRE(fs::exists(manifest));
  CHECK(count_lines(manifest) == 6);
  CHECK(fs::exists(data / "provenance.json"));

  const auto clean = dir.path / "clean";
  REQUIRE(cli({"preprocess", "-c", cfg.string(), "-m", manifest.string(), "-o", clean.string()}) == 0);
  CHECK(count_lines(clean / "manifest.jsonl") == 6);

  const auto gt = dir.path / "gt";
  REQUIRE(cli({"make-gt", "-c", cfg.string(), "-m", manifest.string(), "-o", gt.string()}) == 0);
  CHECK(count_lines(gt / "manifest.jsonl") == 6);

  const auto run = dir.path / "run";
  REQUIRE(cli({"train", "-c", cfg.string(), "-m", (clean / "manifest.jsonl").string(), "-r", run.string()}) == 0);
  const auto final_ck = run / "checkpoints" / "final.pt";
  REQUIRE(fs::exists(final_ck));
  CHECK(count_lines(run / "history.jsonl") == 3);
  CHECK(fs::exists(run / "config.resolved.json"));

  const auto pred = dir.path / "pred";
  REQUIRE(cli({"infer", "-k", final_ck.string(), "-m", manifest.string(), "-o", pred.string()}) == 0);
  const auto first_id = read_json(pred / "provenance.json").at("ids")[0].get<std::string>();
  CHECK(fs::exists(pred / (first_id + "_rgb.png")));
  CHECK(fs::exists(pred / (first_id + "_h.tif")));

  const auto eval = dir.path / "eval";
  REQUIRE(cli({"evaluate", "-p", pred.string(), "-m", manifest.string(), "-o", eval.string(), "--model", "tiny"}) == 0);
  const auto report = read_json(eval / "report.json");
  CHECK(report.at("count") == 6);
  CHECK(report.at("model") == "tiny");
  REQUIRE(cli({"evaluate", "-p", pred.string(), "-m", manifest.string(), "-o", (dir.path / "eval2").string(),
               "--compare", (eval / "report.json").string()}) == 0);
  CHECK(fs::exists(dir.path / "eval2" / "comparison" / "comparison.tsv"));

  const auto sweep = dir.path / "sweep";
  REQUIRE(cli({"schedule-sweep", "-c", cfg.string(), "-m", (clean / "manifest.jsonl").string(), "-r", sweep.string(),
               "-n", "1,2"}) == 0);
  CHECK(count_lines(sweep / "curves.tsv") >= 3);
  CHECK(fs::exists(sweep / "n_1" / "history.jsonl"));
  CHECK(cli({"schedule-sweep", "-c", cfg.string(), "-n", "1,x"}) == 1);
}
