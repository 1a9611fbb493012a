#include <cstdio>
#include <fstream>
#include <sstream>

#include "pmcad/app.hpp"
#include "pmcad/error.hpp"
#include "pmcad/radiomics.hpp"

namespace fs = std::filesystem;

namespace pmcad {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::imported: return "imported";
    case Stage::seeded: return "seeded";
    case Stage::segmented: return "segmented";
    case Stage::accepted: return "accepted";
    case Stage::featured: return "featured";
  }
  return "unknown";
}

Stage parse_stage(const std::string& s) {
  for (Stage st : {Stage::imported, Stage::seeded, Stage::segmented, Stage::accepted, Stage::featured}) {
    if (s == stage_name(st)) return st;
  }
  throw Error(Errc::invalid_argument, "stage", "unknown stage '" + s + "'");
}

nlohmann::json CaseStatus::to_json() const {
  nlohmann::json j{{"case_id", case_id}, {"stage", stage_name(stage)}, {"mask_path", mask_path}};
  j["seed"] = seed ? nlohmann::json{{"z", seed->z}, {"x", seed->x}, {"y", seed->y}} : nlohmann::json(nullptr);
  return j;
}

CaseStatus CaseStatus::from_json(const nlohmann::json& j) {
  CaseStatus s;
  try {
    s.case_id = j.at("case_id").get<std::string>();
    s.stage = parse_stage(j.at("stage").get<std::string>());
    s.mask_path = j.value("mask_path", std::string());
    if (j.contains("seed") && !j["seed"].is_null()) {
      const auto& d = j["seed"];
      s.seed = Seed{d.at("z").get<int>(), d.at("x").get<int>(), d.at("y").get<int>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, "status", e.what());
  }
  return s;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, tmp.string(), "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::io_failure, tmp.string(), "write failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::io_failure, path.string(), "rename failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_file, path.string(), "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Workspace::Workspace(RunConfig config) : config_(std::move(config)) {
  const fs::path manifest = config_.manifest_path();
  if (!fs::exists(manifest)) throw Error(Errc::missing_file, manifest.string(), "manifest not found");
  entries_ = read_manifest(manifest);
}

const ManifestEntry* Workspace::find(const std::string& case_id) const {
  for (const auto& e : entries_) {
    if (e.case_id == case_id) return &e;
  }
  return nullptr;
}

fs::path Workspace::mask_file(const std::string& id) const { return dir("masks") / (id + ".ptm"); }
fs::path Workspace::trace_file(const std::string& id) const { return dir("masks") / (id + ".trace.json"); }
fs::path Workspace::status_file(const std::string& id) const { return dir("status") / (id + ".json"); }

fs::path Workspace::features_file(FeatureMode mode) const {
  return dir("features") / (std::string(feature_mode_name(mode)) + ".csv");
}

CaseStatus Workspace::status(const std::string& case_id) const {
  const fs::path path = status_file(case_id);
  if (fs::exists(path)) {
    try {
      return CaseStatus::from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::bad_header, path.string(), e.what());
    }
  }
  const ManifestEntry* e = find(case_id);
  if (!e) throw Error(Errc::out_of_range, "case_id", "unknown case " + case_id);
  CaseStatus s;
  s.case_id = case_id;
  s.seed = e->seed;
  s.stage = e->seed ? Stage::seeded : Stage::imported;
  return s;
}

void Workspace::save_status(const CaseStatus& status) const {
  write_file_atomic(status_file(status.case_id), status.to_json().dump(2) + "\n");
}

std::vector<double> case_features(const CtVolume& volume, const SegmentationMask& mask, FeatureMode mode) {
  if (volume.dims != mask.dims) throw Error(Errc::dimension_mismatch, "mask", "mask and volume dims differ");
  std::vector<SliceFeatures> per_slice;
  int largest_z = -1;
  std::size_t largest_area = 0;
  for (int z = 0; z < volume.dims.nz; ++z) {
    const std::size_t area = mask.slice_area(z);
    if (area > largest_area) largest_area = area, largest_z = z;
  }
  if (largest_z < 0) throw Error(Errc::empty_input, "mask", "mask is empty");
  if (mode == FeatureMode::features_2d_largest_slice) {
    return extract_slice_features(volume.slice(largest_z), mask.slice(largest_z)).values;
  }
  for (int z = 0; z < volume.dims.nz; ++z) {
    const std::size_t area = mask.slice_area(z);
    if (area == 0) continue;
    per_slice.push_back({extract_slice_features(volume.slice(z), mask.slice(z)).values, area, 0.0});
  }
  return aggregate_volume_features(per_slice, volume.spacing_mm).values;
}

std::string feature_table_csv(const FeatureTable& t) {
  std::string out = "case_id,label";
  for (const auto& name : feature_manifest().names) out += "," + name;
  out += "\n";
  char buf[40];
  for (std::size_t r = 0; r < t.case_ids.size(); ++r) {
    out += t.case_ids[r] + "," + std::to_string(t.labels[r]);
    for (double v : t.x.row(r)) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

FeatureTable read_feature_table(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  const auto& names = feature_manifest().names;
  if (!std::getline(in, line)) throw Error(Errc::bad_header, path.string(), "empty feature table");
  {
    std::istringstream h(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(h, cell, ',')) cols.push_back(cell);
    if (cols.size() != names.size() + 2 || cols[0] != "case_id" || cols[1] != "label" ||
        !std::equal(names.begin(), names.end(), cols.begin() + 2)) {
      throw Error(Errc::bad_header, path.string(), "feature table columns do not match the feature manifest");
    }
  }
  FeatureTable t;
  t.x = Matrix(0, names.size());
  std::vector<double> row(names.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream r(line);
    std::string cell;
    std::getline(r, cell, ',');
    t.case_ids.push_back(cell);
    std::getline(r, cell, ',');
    t.labels.push_back(std::stoi(cell));
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (!std::getline(r, cell, ',')) throw Error(Errc::truncated_payload, path.string(), "short feature row");
      row[k] = std::strtod(cell.c_str(), nullptr);
    }
    t.x.append_row(row);
  }
  return t;
}

}  // namespace pmcad
