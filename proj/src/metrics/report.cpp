#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "inout/errors.hpp"
#include "inout/metrics.hpp"

namespace inout {

namespace {

using json = nlohmann::ordered_json;

/// JSON has no infinity; PSNR of identical images is written as the string "inf".
json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double from_number(const nlohmann::json& j) {
  if (j.is_null()) return std::nan("");
  if (j.is_string()) return j.get<std::string>() == "inf" ? kInfinitePsnr : -kInfinitePsnr;
  return j.get<double>();
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out.precision(17);
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

MetricReport evaluate_dataset(const std::vector<NamedRgb>& predictions, const std::vector<NamedRgb>& targets,
                              const std::string& model) {
  if (predictions.empty()) throw InvalidArgument("no predictions to evaluate");
  std::map<std::string, const RgbImage*> by_id;
  for (const auto& t : targets) {
    if (!by_id.emplace(t.id, &t.image).second) throw InvalidArgument("duplicate target id " + t.id);
  }
  if (by_id.size() != predictions.size()) throw InvalidArgument("prediction and target id sets differ");
  for (const auto& p : predictions)
    if (!by_id.contains(p.id)) throw InvalidArgument("no target for prediction " + p.id);

  const auto& first = predictions.front().image;
  MetricReport r;
  r.model = model;
  r.ms_ssim_scales = max_ms_ssim_scales(first.height, first.width);
  if (r.ms_ssim_scales < 1) throw InvalidArgument("images too small for SSIM");
  const auto weights = truncated_ms_ssim_weights(r.ms_ssim_scales);
  for (const auto& name : kMetricNames) r.per_image[name] = {};

  for (const auto& p : predictions) {
    const auto& t = *by_id.at(p.id);
    const auto pc = p.image.clamped();
    const auto tc = t.clamped();
    r.ids.push_back(p.id);
    const double m = mse(pc, tc);
    r.per_image["mse"].push_back(m);
    r.per_image["psnr"].push_back(psnr_from_mse(m));
    r.per_image["ssim"].push_back(ssim(pc, tc));
    r.per_image["ms_ssim"].push_back(ms_ssim(pc, tc, weights));
    r.per_image["fsim"].push_back(fsim(pc, tc));
    r.per_image["vol"].push_back(vol(pc));
  }
  for (const auto& [name, v] : r.per_image) r.mean[name] = mean_of(v);
  r.psnr_of_mean_mse = psnr_from_mse(r.mean.at("mse"));
  return r;
}

std::vector<PairedTestResult> compare_models(const MetricReport& a, const MetricReport& b) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < b.ids.size(); ++i) pos[b.ids[i]] = i;
  if (pos.size() != a.ids.size()) throw InvalidArgument("reports cover different images");
  std::vector<std::size_t> order;
  for (const auto& id : a.ids) {
    auto it = pos.find(id);
    if (it == pos.end()) throw InvalidArgument("image " + id + " missing from the second report");
    order.push_back(it->second);
  }
  std::vector<PairedTestResult> out;
  for (const auto& name : kMetricNames) {
    const auto& va = a.per_image.at(name);
    std::vector<double> vb;
    for (auto k : order) vb.push_back(b.per_image.at(name)[k]);
    out.push_back(paired_t_test(va, vb, name));
  }
  return out;
}

void write_report(const MetricReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j;
  j["model"] = r.model;
  j["count"] = r.ids.size();
  j["ms_ssim_scales"] = r.ms_ssim_scales;
  for (const auto& name : kMetricNames) j["mean"][name] = number(r.mean.at(name));
  j["psnr_of_mean_mse"] = number(r.psnr_of_mean_mse);
  j["ids"] = r.ids;
  for (const auto& name : kMetricNames) {
    json col = json::array();
    for (double v : r.per_image.at(name)) col.push_back(number(v));
    j["per_image"][name] = col;
  }
  open_out(dir / "report.json") << j.dump(2) << '\n';

  auto tsv = open_out(dir / "metrics.tsv");
  tsv << "id";
  for (const auto& name : kMetricNames) tsv << '\t' << name;
  tsv << '\n';
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    tsv << r.ids[i];
    for (const auto& name : kMetricNames) tsv << '\t' << r.per_image.at(name)[i];
    tsv << '\n';
  }
}

MetricReport read_report(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot read " + json_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    MetricReport r;
    r.model = j.at("model").get<std::string>();
    r.ms_ssim_scales = j.at("ms_ssim_scales").get<int>();
    r.ids = j.at("ids").get<std::vector<std::string>>();
    for (const auto& name : kMetricNames) {
      for (const auto& v : j.at("per_image").at(name)) r.per_image[name].push_back(from_number(v));
      if (r.per_image[name].size() != r.ids.size()) throw IoError("column " + name + " has the wrong length");
      r.mean[name] = from_number(j.at("mean").at(name));
    }
    r.psnr_of_mean_mse = from_number(j.at("psnr_of_mean_mse"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed report " + json_path.string() + ": " + e.what());
  }
}

void write_comparison(const MetricReport& a, const MetricReport& b, const std::vector<PairedTestResult>& tests,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j;
  j["a"] = a.model;
  j["b"] = b.model;
  j["tests"] = json::array();
  for (const auto& t : tests) {
    json e;
    e["metric"] = t.metric;
    e["n"] = t.n;
    e["mean_difference"] = number(t.mean_difference);
    e["sd_difference"] = number(t.sd_difference);
    e["degenerate"] = t.degenerate;
    e["t"] = t.t ? number(*t.t) : json(nullptr);
    e["p"] = t.p ? number(*t.p) : json(nullptr);
    j["tests"].push_back(e);
  }
  open_out(dir / "comparison.json") << j.dump(2) << '\n';

  auto tsv = open_out(dir / "comparison.tsv");
  tsv << "metric\tn\tmean_difference\tt\tp\tdegenerate\n";
  for (const auto& t : tests) {
    tsv << t.metric << '\t' << t.n << '\t' << t.mean_difference << '\t';
    if (t.t) tsv << *t.t; else tsv << "NA";
    tsv << '\t';
    if (t.p) tsv << *t.p; else tsv << "NA";
    tsv << '\t' << (t.degenerate ? 1 : 0) << '\n';
  }

  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < b.ids.size(); ++i) pos[b.ids[i]] = i;
  auto diff = open_out(dir / "differences.tsv");
  diff << "id\tmetric\ta\tb\tdifference\n";
  for (const auto& name : kMetricNames) {
    for (std::size_t i = 0; i < a.ids.size(); ++i) {
      const double va = a.per_image.at(name)[i];
      const double vb = b.per_image.at(name).at(pos.at(a.ids[i]));
      diff << a.ids[i] << '\t' << name << '\t' << va << '\t' << vb << '\t' << va - vb << '\n';
    }
  }
}

}  // namespace inout
