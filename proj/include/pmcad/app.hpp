#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcad/evaluation.hpp"
#include "pmcad/phantom.hpp"
#include "pmcad/segmentation.hpp"

namespace httplib {
class Server;
}

namespace pmcad {

struct ServeOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::filesystem::path static_dir;
};

struct RunConfig {
  // Empty manifest means the phantom dataset inside work_dir.
  std::filesystem::path manifest;
  std::filesystem::path work_dir = "work";
  PipelineConfig pipeline;
  SegmentationParams segmentation;
  std::optional<PhantomSpec> phantom;
  int phantom_pm = 30;
  int phantom_non_pm = 10;
  ServeOptions serve;

  std::filesystem::path manifest_path() const;
};

// Relative paths inside the file resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const RunConfig& config);
// --seed: one value drives phantom generation, propagation and evaluation.
void apply_seed(RunConfig& config, std::uint64_t seed);

enum class Stage { imported, seeded, segmented, accepted, featured };
const char* stage_name(Stage s);
Stage parse_stage(const std::string& s);

struct CaseStatus {
  std::string case_id;
  Stage stage = Stage::imported;
  std::optional<Seed> seed;
  // Relative to the work directory; empty until segmented.
  std::string mask_path;

  nlohmann::json to_json() const;
  static CaseStatus from_json(const nlohmann::json& j);
  bool operator==(const CaseStatus&) const = default;
};

// The on-disk state of a run: manifest (read-only) plus work_dir artifacts.
class Workspace {
 public:
  explicit Workspace(RunConfig config);

  const RunConfig& config() const { return config_; }
  const std::vector<ManifestEntry>& entries() const { return entries_; }
  const ManifestEntry* find(const std::string& case_id) const;

  std::filesystem::path dir(const char* name) const { return config_.work_dir / name; }
  std::filesystem::path mask_file(const std::string& case_id) const;
  std::filesystem::path trace_file(const std::string& case_id) const;
  std::filesystem::path status_file(const std::string& case_id) const;
  std::filesystem::path features_file(FeatureMode mode) const;

  // Persisted status, or the manifest-derived initial one.
  CaseStatus status(const std::string& case_id) const;
  void save_status(const CaseStatus& status) const;

 private:
  RunConfig config_;
  std::vector<ManifestEntry> entries_;
};

// Writes bytes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Per-case feature vector from a volume and its mask in the chosen mode.
std::vector<double> case_features(const CtVolume& volume, const SegmentationMask& mask, FeatureMode mode);

struct FeatureTable {
  std::vector<std::string> case_ids;
  std::vector<int> labels;
  Matrix x;
};
std::string feature_table_csv(const FeatureTable& table);
FeatureTable read_feature_table(const std::filesystem::path& path);

// Command entry points. Return a process exit code; diagnostics go to `log`.
int cmd_phantom(const RunConfig& config, std::ostream& log);
int cmd_segment(const RunConfig& config, const std::vector<std::string>& case_filter, std::ostream& log);
int cmd_features(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, bool compare, std::ostream& log);
int cmd_serve(const RunConfig& config, std::ostream& log);

std::string report_stem(const PipelineConfig& config);

class ApiServer {
 public:
  explicit ApiServer(RunConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct CaseState;
  CaseState& state(const std::string& case_id);
  std::shared_ptr<const CtVolume> volume(const std::string& case_id);
  void install_routes();

  Workspace workspace_;
  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, std::unique_ptr<CaseState>> cases_;
};

}  // namespace pmcad
