#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "inout/cli.hpp"
#include "inout/errors.hpp"
#include "inout/preprocess.hpp"

namespace inout {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Corpus files

std::vector<ManifestEntry> write_corpus(const std::vector<PairedSample>& samples, const fs::path& dir) {
  for (const char* sub : {"rcm", "h", "e", "rgb", "mask"}) fs::create_directories(dir / sub);
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    ManifestEntry m;
    m.id = s.id;
    m.patient = s.patient_id;
    m.rcm = "rcm/" + s.id + ".tif";
    save_image(s.rcm, dir / m.rcm);
    if (s.h_target.size() > 0) {
      m.h = "h/" + s.id + ".tif";
      save_image(s.h_target, dir / m.h);
    }
    if (s.e_target.size() > 0) {
      m.e = "e/" + s.id + ".tif";
      save_image(s.e_target, dir / m.e);
    }
    if (!s.rgb_target.values.empty()) {
      m.rgb = "rgb/" + s.id + ".png";
      save_rgb(s.rgb_target, dir / m.rgb);
    }
    if (s.artifact && s.artifact->count() > 0) {
      m.mask = "mask/" + s.id + ".png";
      save_mask(*s.artifact, dir / m.mask);
    }
    entries.push_back(std::move(m));
  }
  write_manifest(entries, dir / "manifest.jsonl");
  return entries;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base / p;
}

PairedSample load_entry(const ManifestEntry& m, const fs::path& base) {
  PairedSample s;
  s.id = m.id;
  s.patient_id = m.patient;
  if (m.rcm.empty()) throw IoError("manifest entry " + m.id + " has no input image");
  s.rcm = to_unit_range(load_image(resolve(base, m.rcm)));
  if (!m.h.empty()) s.h_target = to_unit_range(load_image(resolve(base, m.h)));
  if (!m.e.empty()) s.e_target = to_unit_range(load_image(resolve(base, m.e)));
  if (!m.rgb.empty()) s.rgb_target = load_rgb(resolve(base, m.rgb));
  if (!m.mask.empty()) s.artifact = load_mask(resolve(base, m.mask));
  return s;
}

}  // namespace

std::vector<PairedSample> load_corpus(const fs::path& manifest) {
  const auto entries = read_manifest(manifest);
  std::vector<PairedSample> out;
  for (const auto& m : entries) out.push_back(load_entry(m, manifest.parent_path()));
  return out;
}

std::vector<PairedSample> remove_artifacts(std::vector<PairedSample> samples, const PreprocessSettings& p,
                                           const ArtifactMask* shared_mask) {
  for (auto& s : samples) {
    const ArtifactMask* mask = s.artifact ? &*s.artifact : shared_mask;
    if (mask == nullptr || mask->count() == 0) continue;
    s.rcm = inpaint(s.rcm, *mask, p.inpaint_tol, p.inpaint_max_iter).image;
  }
  return samples;
}

PreparedData prepare_data(std::vector<PairedSample> samples, const std::vector<std::string>& test_patients) {
  for (const auto& s : samples) {
    if (s.h_target.size() == 0 || s.e_target.size() == 0 || s.rgb_target.values.empty())
      throw InvalidArgument("sample " + s.id + " lacks H, E or RGB targets");
  }
  std::vector<std::string> patients;
  for (const auto& s : samples) patients.push_back(s.patient_id);
  PreparedData d;
  d.split = build_dataset(patients, test_patients);
  d.train = to_tensors(samples, d.split.train);
  d.test = to_tensors(samples, d.split.test);
  d.samples = std::move(samples);
  return d;
}

std::vector<NamedRgb> predict(NetworkAssembly& net, const PreparedData& data) {
  std::vector<Image2D> inputs;
  for (const auto& r : data.split.test) inputs.push_back(data.samples[r.index].rcm);
  const auto stained = infer(net, inputs);
  std::vector<NamedRgb> out;
  for (std::size_t k = 0; k < stained.size(); ++k)
    out.push_back({data.samples[data.split.test[k].index].id, stained[k].i_rgb});
  return out;
}

std::vector<NamedRgb> targets(const PreparedData& data) {
  std::vector<NamedRgb> out;
  for (const auto& r : data.split.test) out.push_back({data.samples[r.index].id, data.samples[r.index].rgb_target});
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

void log_epoch(const std::string& tag, const EpochRecord& r) {
  std::fprintf(stderr, "[%s] epoch %d %s eval_loss %.5f (%.1fs)\n", tag.c_str(), r.epoch, to_string(r.phase).c_str(),
               r.eval_loss, r.wall_seconds);
}

TrainResult train_run(const RunConfig& c, const PreparedData& data, const fs::path& dir, const std::string& tag,
                      const std::optional<fs::path>& resume = std::nullopt) {
  write_run_record(c, dir, "train " + tag);
  TrainOptions opts;
  opts.run_dir = dir;
  opts.on_epoch = [tag](const EpochRecord& r) { log_epoch(tag, r); };
  opts.resume_from = resume;
  return train(data.train, data.test, c.training, opts);
}

struct AblationTag {
  const char* tag;
  Ablation ablation;
};

constexpr AblationTag kAblationTags[] = {
    {"full", Ablation::None},         {"ablation1", Ablation::NoInOut},    {"ablation2", Ablation::NoDout},
    {"ablation3", Ablation::NoDhDe},  {"ablation4", Ablation::NoBranches},
};

}  // namespace

std::vector<AblationRun> run_ablation_study(const RunConfig& c, const PreparedData& data, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  write_run_record(c, run_dir, "ablate");
  std::vector<AblationRun> runs;
  const auto truth = targets(data);
  for (const auto& [tag, ablation] : kAblationTags) {
    RunConfig rc = c;
    rc.training.ablation = ablation;
    auto result = train_run(rc, data, run_dir / tag, tag);
    AblationRun run;
    run.tag = tag;
    run.ablation = ablation;
    run.history = result.history;
    run.report = evaluate_dataset(predict(*result.model, data), truth, tag);
    run.params = audit_params(*result.model, c.phantom.image_size);
    write_report(run.report, run_dir / tag / "evaluation");
    if (!runs.empty()) write_comparison(runs.front().report, run.report, compare_models(runs.front().report, run.report),
                                        run_dir / tag / "vs_full");
    runs.push_back(std::move(run));
  }

  std::ofstream table(run_dir / "ablation_table.tsv");
  table.precision(10);
  table << "tag\tablation\tinout_training\td_out\td_h_d_e\tbranches\tparameters\tfinal_eval_loss";
  for (const auto& m : kMetricNames) table << '\t' << m;
  table << "\tpsnr_of_mean_mse\n";
  for (const auto& r : runs) {
    RunConfig rc = c;
    rc.training.ablation = r.ablation;
    const auto plan = apply_ablation(rc.training);
    table << r.tag << '\t' << to_string(r.ablation) << '\t' << (plan.alpha.alternating && plan.assembly.branches)
          << '\t' << plan.assembly.use_dout << '\t' << plan.assembly.use_dhde << '\t' << plan.assembly.branches << '\t'
          << r.params.total << '\t' << r.history.epochs.back().eval_loss;
    for (const auto& m : kMetricNames) table << '\t' << r.report.mean.at(m);
    table << '\t' << r.report.psnr_of_mean_mse << '\n';
  }
  return runs;
}

std::vector<SweepRun> run_schedule_sweep(const RunConfig& c, const PreparedData& data, const std::vector<int>& n_values,
                                         const fs::path& run_dir) {
  if (n_values.empty()) throw InvalidArgument("empty list of n values");
  fs::create_directories(run_dir);
  write_run_record(c, run_dir, "schedule-sweep");
  std::vector<SweepRun> runs;
  for (int n : n_values) {
    RunConfig rc = c;
    rc.training.n_alternate = n;
    const std::string tag = "n_" + std::to_string(n);
    auto result = train_run(rc, data, run_dir / tag, tag);
    runs.push_back({n, result.history});
  }
  std::ofstream curves(run_dir / "curves.tsv");
  curves.precision(10);
  curves << "epoch";
  for (const auto& r : runs) curves << "\teval_loss_n" << r.n;
  curves << '\n';
  curves << 0;
  for (const auto& r : runs) curves << '\t' << r.history.initial_eval_loss;
  curves << '\n';
  for (int e = 1; e <= c.training.total_epochs; ++e) {
    curves << e;
    for (const auto& r : runs) curves << '\t' << r.history.epochs.at(static_cast<std::size_t>(e - 1)).eval_loss;
    curves << '\n';
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Command surface

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<PairedSample> load_training_corpus(const RunConfig& c) {
  auto entries = read_manifest(c.manifest_path());
  if (!c.paths.exclusions.empty()) entries = apply_exclusions(entries, c.paths.exclusions);
  std::vector<PairedSample> out;
  for (const auto& m : entries) out.push_back(load_entry(m, c.manifest_path().parent_path()));
  return out;
}

std::string relative_to(const fs::path& target, const fs::path& dir) {
  return fs::relative(fs::absolute(target), fs::absolute(dir)).generic_string();
}

nlohmann::ordered_json param_json(const ParamReport& r) {
  return {{"g_h", r.g_h},
          {"g_e", r.g_e},
          {"concat", r.concat},
          {"g_single", r.g_single},
          {"d_h", r.d_h},
          {"d_e", r.d_e},
          {"d_out", r.d_out},
          {"generator_total", r.generator_total},
          {"discriminator_total", r.discriminator_total},
          {"total", r.total},
          {"inference_macs", r.inference_macs}};
}

int cmd_synth(const RunConfig& c, const fs::path& out) {
  const auto samples = generate_corpus(c.phantom, c.corpus.patients, c.corpus.images_per_patient, c.stain);
  write_corpus(samples, out);
  write_run_record(c, out, "synth");
  std::cout << "wrote " << samples.size() << " samples to " << (out / "manifest.jsonl").string() << '\n';
  return 0;
}

int cmd_preprocess(const RunConfig& c, const fs::path& manifest, const fs::path& out, bool force_normalize) {
  const auto entries = read_manifest(manifest);
  const auto base = manifest.parent_path();
  std::optional<ArtifactMask> shared;
  if (!c.paths.calibration.empty())
    shared = mask_from_calibration(to_unit_range(load_image(c.paths.calibration)), c.preprocess.mask_percentile);
  fs::create_directories(out / "rcm");
  std::vector<ManifestEntry> written;
  for (auto m : entries) {
    const auto stack = load_stack(resolve(base, m.rcm));
    Image2D img;
    bool normalize_it = force_normalize;
    if (stack.depth() > 1) {
      img = extract_surface(stack, c.preprocess.smooth_radius).image;
      normalize_it = true;
    } else {
      img = stack.layers.front();
    }
    img = normalize_it ? normalize(img, c.preprocess.normalize_lo, c.preprocess.normalize_hi).image : to_unit_range(img);
    std::optional<ArtifactMask> mask;
    if (!m.mask.empty()) mask = load_mask(resolve(base, m.mask));
    else if (shared) mask = shared;
    if (mask && mask->count() > 0)
      img = inpaint(img, *mask, c.preprocess.inpaint_tol, c.preprocess.inpaint_max_iter).image;
    const auto rcm_rel = "rcm/" + m.id + ".tif";
    save_image(img, out / rcm_rel);
    for (std::string* field : {&m.h, &m.e, &m.rgb, &m.mask})
      if (!field->empty()) *field = relative_to(resolve(base, *field), out);
    m.rcm = rcm_rel;
    written.push_back(m);
  }
  write_manifest(written, out / "manifest.jsonl");
  write_run_record(c, out, "preprocess");
  std::cout << "preprocessed " << written.size() << " inputs into " << out.string() << '\n';
  return 0;
}

int cmd_make_gt(const RunConfig& c, const fs::path& manifest, const fs::path& out) {
  const auto entries = read_manifest(manifest);
  const auto base = manifest.parent_path();
  for (const char* sub : {"rgb", "h", "e"}) fs::create_directories(out / sub);
  std::vector<ManifestEntry> written;
  std::size_t composed = 0, decomposed = 0;
  for (auto m : entries) {
    for (std::string* field : {&m.rcm, &m.h, &m.e, &m.rgb, &m.mask})
      if (!field->empty()) *field = relative_to(resolve(base, *field), out);
    if (!m.h.empty() && !m.e.empty()) {
      const auto h = to_unit_range(load_image(out / m.h));
      const auto e = to_unit_range(load_image(out / m.e));
      m.rgb = "rgb/" + m.id + ".png";
      save_rgb(beer_lambert_he(h, e, c.stain), out / m.rgb);
      ++composed;
    } else if (!m.rgb.empty()) {
      const auto d = decompose_he(load_rgb(out / m.rgb), c.stain);
      m.h = "h/" + m.id + ".tif";
      m.e = "e/" + m.id + ".tif";
      save_image(d.h, out / m.h);
      save_image(d.e, out / m.e);
      ++decomposed;
    }
    written.push_back(m);
  }
  write_manifest(written, out / "manifest.jsonl");
  write_run_record(c, out, "make-gt");
  std::cout << "composed " << composed << ", decomposed " << decomposed << " into " << out.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& c, const std::optional<fs::path>& resume) {
  auto data = prepare_data(load_training_corpus(c), c.corpus.test_patients);
  auto result = train_run(c, data, c.paths.run_dir, to_string(c.training.ablation), resume);
  std::cout << "final checkpoint " << result.final_checkpoint.string() << '\n';
  return 0;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& manifest, const std::vector<fs::path>& inputs,
              const fs::path& out) {
  auto ck = load_checkpoint(checkpoint);
  std::vector<std::string> ids;
  std::vector<Image2D> images;
  if (!manifest.empty()) {
    for (const auto& m : read_manifest(manifest)) {
      ids.push_back(m.id);
      images.push_back(to_unit_range(load_image(resolve(manifest.parent_path(), m.rcm))));
    }
  }
  for (const auto& p : inputs) {
    ids.push_back(p.stem().string());
    images.push_back(to_unit_range(load_image(p)));
  }
  if (images.empty()) throw UsageError("nothing to infer: give --manifest or --input");
  const auto stained = infer(*ck.model, images);
  fs::create_directories(out);
  for (std::size_t k = 0; k < stained.size(); ++k) {
    save_rgb(stained[k].i_rgb, out / (ids[k] + "_rgb.png"));
    if (stained[k].i_h.size() > 0) {
      save_image(stained[k].i_h, out / (ids[k] + "_h.tif"));
      save_image(stained[k].i_e, out / (ids[k] + "_e.tif"));
    }
  }
  nlohmann::ordered_json prov;
  prov["command"] = "infer";
  prov["version"] = version_tag();
  prov["checkpoint"] = fs::absolute(checkpoint).string();
  prov["checkpoint_epoch"] = ck.epoch;
  prov["config"] = to_json(ck.config);
  prov["ids"] = ids;
  std::ofstream(out / "provenance.json") << prov.dump(2) << '\n';
  std::cout << "stained " << stained.size() << " images into " << out.string() << '\n';
  return 0;
}

int cmd_evaluate(const fs::path& pred_dir, const fs::path& manifest, const fs::path& out, const std::string& model,
                 const fs::path& compare) {
  std::vector<NamedRgb> preds, truth;
  for (const auto& m : read_manifest(manifest)) {
    if (m.rgb.empty()) throw InvalidArgument("manifest entry " + m.id + " has no RGB target");
    const auto p = pred_dir / (m.id + "_rgb.png");
    if (!fs::exists(p)) continue;
    preds.push_back({m.id, load_rgb(p)});
    truth.push_back({m.id, load_rgb(resolve(manifest.parent_path(), m.rgb))});
  }
  if (preds.empty()) throw IoError("no <id>_rgb.png predictions in " + pred_dir.string() + " match the manifest");
  const auto report = evaluate_dataset(preds, truth, model);
  write_report(report, out);
  if (!compare.empty()) {
    const auto other = read_report(compare);
    write_comparison(report, other, compare_models(report, other), out / "comparison");
  }
  std::cout << "evaluated " << report.ids.size() << " images: ";
  for (const auto& name : kMetricNames) std::cout << name << ' ' << report.mean.at(name) << ' ';
  std::cout << '\n';
  return 0;
}

int cmd_audit(const RunConfig& c, const fs::path& out) {
  nlohmann::ordered_json j;
  NetworkAssembly reference(reference_options());
  j["reference"] = param_json(audit_params(reference, 256));
  auto single = reference_options();
  single.branches = false;
  single.use_dhde = false;
  single.generator.in_channels = 1;
  NetworkAssembly ablation4(single);
  j["reference_single_branch"] = param_json(audit_params(ablation4, 256));
  const auto plan = apply_ablation(c.training);
  NetworkAssembly configured(plan.assembly);
  j["configured"] = param_json(audit_params(configured, c.audit_input_size));
  j["configured_input_size"] = c.audit_input_size;
  const auto text = j.dump(2);
  if (out.empty()) {
    std::cout << text << '\n';
  } else {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << text << '\n';
  }
  return 0;
}

std::vector<int> parse_n_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad n value '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"In-and-out virtual staining pipeline"};
  app.set_version_flag("--version", version_tag());
  app.require_subcommand(1);

  fs::path config_path, out, manifest, checkpoint, compare, run_dir, resume, pred;
  std::string model_name, n_list, ablation;
  std::vector<fs::path> inputs;
  bool force_normalize = false;

  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", config_path, "run configuration (JSON)");
    if (required) opt->required();
  };

  auto* synth = app.add_subcommand("synth", "generate a phantom corpus and manifest");
  add_config(synth, true);
  synth->add_option("-o,--out", out, "output directory (default: paths.data_dir)");

  auto* pre = app.add_subcommand("preprocess", "surface extraction, normalization and artifact inpainting");
  add_config(pre, true);
  pre->add_option("-m,--manifest", manifest, "input manifest")->required();
  pre->add_option("-o,--out", out, "output directory")->required();
  pre->add_flag("--normalize", force_normalize, "percentile-normalize single-frame inputs too");

  auto* gt = app.add_subcommand("make-gt", "compose virtual H&E targets from channel images");
  add_config(gt, true);
  gt->add_option("-m,--manifest", manifest, "input manifest")->required();
  gt->add_option("-o,--out", out, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train one configuration");
  add_config(tr, true);
  tr->add_option("-m,--manifest", manifest, "dataset manifest (default: from config)");
  tr->add_option("-r,--run-dir", run_dir, "run directory (default: from config)");
  tr->add_option("--resume", resume, "checkpoint to continue from");
  tr->add_option("--ablation", ablation, "none|no_inout|no_dout|no_dhde|no_branches");

  auto* inf = app.add_subcommand("infer", "stain images with a trained checkpoint");
  inf->add_option("-k,--checkpoint", checkpoint, "checkpoint file")->required();
  inf->add_option("-m,--manifest", manifest, "manifest of inputs");
  inf->add_option("-i,--input", inputs, "input image files");
  inf->add_option("-o,--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "metric report for a directory of predictions");
  ev->add_option("-p,--pred", pred, "directory holding <id>_rgb.png predictions")->required();
  ev->add_option("-m,--manifest", manifest, "manifest with RGB targets")->required();
  ev->add_option("-o,--out", out, "report directory")->required();
  ev->add_option("--model", model_name, "model label in the report");
  ev->add_option("--compare", compare, "report.json of another model for paired tests");

  auto* ab = app.add_subcommand("ablate", "train the full model and the four ablations");
  add_config(ab, true);
  ab->add_option("-m,--manifest", manifest, "dataset manifest (default: from config)");
  ab->add_option("-r,--run-dir", run_dir, "run directory (default: from config)");

  auto* sw = app.add_subcommand("schedule-sweep", "train across alternation lengths n");
  add_config(sw, true);
  sw->add_option("-n,--n-values", n_list, "comma-separated n values (default: sweep.n_values)");
  sw->add_option("-m,--manifest", manifest, "dataset manifest (default: from config)");
  sw->add_option("-r,--run-dir", run_dir, "run directory (default: from config)");

  auto* au = app.add_subcommand("audit", "parameter and complexity report");
  add_config(au, false);
  au->add_option("-o,--out", out, "write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig c;
    if (!config_path.empty()) c = load_run_config(config_path);
    else c.resolve_seeds();
    if (!manifest.empty()) c.paths.manifest = manifest;
    if (!run_dir.empty()) c.paths.run_dir = run_dir;
    if (!ablation.empty()) {
      try {
        c.training.ablation = ablation_from_string(ablation);
      } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
      }
    }

    if (synth->parsed()) return cmd_synth(c, out.empty() ? c.paths.data_dir : out);
    if (pre->parsed()) return cmd_preprocess(c, manifest, out, force_normalize);
    if (gt->parsed()) return cmd_make_gt(c, manifest, out);
    if (tr->parsed()) return cmd_train(c, resume.empty() ? std::nullopt : std::optional<fs::path>(resume));
    if (inf->parsed()) return cmd_infer(checkpoint, manifest, inputs, out);
    if (ev->parsed()) return cmd_evaluate(pred, manifest, out, model_name, compare);
    if (ab->parsed()) {
      auto data = prepare_data(load_training_corpus(c), c.corpus.test_patients);
      run_ablation_study(c, data, c.paths.run_dir);
      std::cout << "ablation table " << (c.paths.run_dir / "ablation_table.tsv").string() << '\n';
      return 0;
    }
    if (sw->parsed()) {
      const auto ns = n_list.empty() ? c.sweep_n : parse_n_list(n_list);
      auto data = prepare_data(load_training_corpus(c), c.corpus.test_patients);
      run_schedule_sweep(c, data, ns, c.paths.run_dir);
      std::cout << "curves " << (c.paths.run_dir / "curves.tsv").string() << '\n';
      return 0;
    }
    if (au->parsed()) return cmd_audit(c, out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

}  // namespace inout
