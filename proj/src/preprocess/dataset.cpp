#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "inout/errors.hpp"
#include "inout/preprocess.hpp"

namespace inout {

DatasetSplit build_dataset(const std::vector<std::string>& sample_patients,
                           const std::vector<std::string>& test_patients) {
  std::set<std::string> all(sample_patients.begin(), sample_patients.end());
  if (all.size() < 2) throw InvalidArgument("a patient-level split needs at least two patients");
  if (test_patients.empty()) throw InvalidArgument("no test patients given");
  std::set<std::string> test(test_patients.begin(), test_patients.end());
  for (const auto& p : test) {
    if (!all.contains(p)) throw InvalidArgument("unknown test patient id: " + p);
  }
  if (test.size() == all.size()) throw InvalidArgument("every patient is a test patient; train side empty");

  DatasetSplit split;
  for (std::size_t k = 0; k < sample_patients.size(); ++k) {
    const auto& p = sample_patients[k];
    if (test.contains(p)) {
      split.test.push_back({p, k});
      split.test_patients.insert(p);
    } else {
      split.train.push_back({p, k});
      split.train_patients.insert(p);
    }
  }
  return split;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ManifestEntry m;
    m.id = j.value("id", "");
    m.patient = j.value("patient", "");
    m.rcm = j.value("rcm", "");
    m.h = j.value("h", "");
    m.e = j.value("e", "");
    m.rgb = j.value("rgb", "");
    m.mask = j.value("mask", "");
    if (m.id.empty() || m.patient.empty()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": entry needs id and patient");
    }
    out.push_back(std::move(m));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& m : entries) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["patient"] = m.patient;
    if (!m.rcm.empty()) j["rcm"] = m.rcm;
    if (!m.h.empty()) j["h"] = m.h;
    if (!m.e.empty()) j["e"] = m.e;
    if (!m.rgb.empty()) j["rgb"] = m.rgb;
    if (!m.mask.empty()) j["mask"] = m.mask;
    out << j.dump() << '\n';
  }
}

std::vector<ManifestEntry> apply_exclusions(const std::vector<ManifestEntry>& entries,
                                            const std::filesystem::path& exclusion_file) {
  std::ifstream in(exclusion_file);
  if (!in) throw IoError("cannot open exclusion list " + exclusion_file.string());
  std::set<std::string> drop;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    drop.insert(line.substr(b, e - b + 1));
  }
  std::vector<ManifestEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const ManifestEntry& m) { return !drop.contains(m.id); });
  return out;
}

}  // namespace inout
