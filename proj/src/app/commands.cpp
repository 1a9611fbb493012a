#include <algorithm>
#include <set>

#include "pmcad/app.hpp"
#include "pmcad/error.hpp"
#include "pmcad/parallel.hpp"
#include "pmcad/rng.hpp"

namespace fs = std::filesystem;

namespace pmcad {

namespace {

constexpr std::uint64_t kCompareStream = 0xc0ba7eULL;

void ensure_layout(const fs::path& work_dir) {
  std::error_code ec;
  for (const char* sub : {"masks", "features", "reports", "status"}) {
    fs::create_directories(work_dir / sub, ec);
    if (ec) throw Error(Errc::io_failure, (work_dir / sub).string(), ec.message());
  }
}

void write_report(const fs::path& dir, const std::string& stem, const EvaluationReport& report) {
  write_file_atomic(dir / (stem + ".json"), report.to_json().dump(2) + "\n");
  write_file_atomic(dir / (stem + "_scores.csv"), report.scores_csv());
  write_file_atomic(dir / (stem + "_roc.csv"), report.roc_csv());
}

}  // namespace

std::string report_stem(const PipelineConfig& c) {
  std::string stem = std::string(feature_mode_name(c.feature_mode)) + "_" + balance_mode_name(c.balance_mode) + "_" +
                     reducer_name(c.reducer);
  if (c.reducer != ReducerKind::none) stem += "_d" + std::to_string(c.reduced_dim);
  return stem;
}

int cmd_phantom(const RunConfig& config, std::ostream& log) {
  const PhantomSpec spec = config.phantom.value_or(PhantomSpec{});
  const fs::path manifest =
      generate_dataset(spec, config.phantom_pm, config.phantom_non_pm, spec.seed, config.work_dir / "dataset");
  ensure_layout(config.work_dir);
  log << "phantom: wrote " << (config.phantom_pm + config.phantom_non_pm) << " cases to " << manifest.string() << "\n";
  return 0;
}

int cmd_segment(const RunConfig& config, const std::vector<std::string>& case_filter, std::ostream& log) {
  const Workspace ws(config);
  ensure_layout(config.work_dir);
  std::vector<const ManifestEntry*> selected;
  if (case_filter.empty()) {
    for (const auto& e : ws.entries()) selected.push_back(&e);
  } else {
    for (const auto& id : case_filter) {
      const ManifestEntry* e = ws.find(id);
      if (!e) throw Error(Errc::out_of_range, "case_id", "unknown case " + id);
      selected.push_back(e);
    }
  }
  if (selected.empty()) throw Error(Errc::empty_input, "manifest", "no cases to segment");

  std::vector<std::string> messages(selected.size());
  std::vector<char> done(selected.size(), 0);
  parallel_for(selected.size(), [&](std::size_t i) {
    const ManifestEntry& e = *selected[i];
    CaseStatus status = ws.status(e.case_id);
    if (!status.seed) {
      messages[i] = "warning: " + e.case_id + " has no seed; skipped";
      return;
    }
    const CtVolume volume = load_volume(e.volume_path);
    SegmentationResult result = propagate_volume(volume, *status.seed, config.segmentation);
    result.mask.case_id = e.case_id;
    write_file_atomic(ws.mask_file(e.case_id), encode_mask(result.mask));
    write_file_atomic(ws.trace_file(e.case_id), trace_to_json(result).dump(2) + "\n");
    status.stage = std::max(status.stage, Stage::segmented);
    status.mask_path = fs::relative(ws.mask_file(e.case_id), config.work_dir).generic_string();
    ws.save_status(status);
    std::size_t voxels = 0;
    for (auto b : result.mask.bits) voxels += b;
    messages[i] = "segmented " + e.case_id + ": " + std::to_string(result.per_slice.size()) + " slices, " +
                  std::to_string(voxels) + " voxels";
    done[i] = 1;
  });
  for (const auto& m : messages) log << m << "\n";
  return std::count(done.begin(), done.end(), 1) == 0 ? 2 : 0;
}

int cmd_features(const RunConfig& config, std::ostream& log) {
  const Workspace ws(config);
  ensure_layout(config.work_dir);
  const auto& entries = ws.entries();
  const FeatureMode mode = config.pipeline.feature_mode;
  std::vector<std::optional<std::vector<double>>> rows(entries.size());
  std::vector<std::string> messages(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    CaseStatus status = ws.status(e.case_id);
    if (status.stage < Stage::segmented || !fs::exists(ws.mask_file(e.case_id))) {
      messages[i] = "warning: " + e.case_id + " is not segmented; skipped";
      return;
    }
    const CtVolume volume = load_volume(e.volume_path);
    const SegmentationMask mask = load_mask(ws.mask_file(e.case_id));
    rows[i] = case_features(volume, mask, mode);
    status.stage = std::max(status.stage, Stage::featured);
    ws.save_status(status);
  });
  FeatureTable table;
  table.x = Matrix(0, kFeatureCount);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!messages[i].empty()) log << messages[i] << "\n";
    if (!rows[i]) continue;
    table.case_ids.push_back(entries[i].case_id);
    table.labels.push_back(entries[i].label);
    table.x.append_row(*rows[i]);
  }
  if (table.case_ids.empty()) {
    log << "features: no segmented cases\n";
    return 2;
  }
  const fs::path out = ws.features_file(mode);
  write_file_atomic(out, feature_table_csv(table));
  log << "features: " << table.case_ids.size() << " rows x " << kFeatureCount << " columns -> " << out.string()
      << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& config, bool compare, std::ostream& log) {
  const fs::path features = config.work_dir / "features" / (std::string(feature_mode_name(config.pipeline.feature_mode)) + ".csv");
  if (!fs::exists(features)) throw Error(Errc::missing_file, features.string(), "run the features command first");
  ensure_layout(config.work_dir);
  const FeatureTable table = read_feature_table(features);
  Dataset data{table.case_ids, table.x, table.labels, {}};
  const fs::path reports = config.work_dir / "reports";

  auto run = [&](PipelineConfig pc) {
    const EvaluationReport report = loco_evaluate(data, pc);
    const std::string stem = report_stem(pc);
    write_report(reports, stem, report);
    char line[160];
    std::snprintf(line, sizeof line, "%s: AUC %.4f +/- %.4f, accuracy %.4f over %zu cases\n", stem.c_str(),
                  report.auc, report.auc_std, report.accuracy, report.cases.size());
    log << line;
    return report;
  };

  if (!compare) {
    run(config.pipeline);
    return 0;
  }
  PipelineConfig a = config.pipeline, b = config.pipeline;
  a.reducer = ReducerKind::rpa;
  b.reducer = ReducerKind::pca;
  const EvaluationReport ra = run(a), rb = run(b);
  const RunComparison cmp = compare_runs(ra, rb, config.pipeline.bootstrap_resamples,
                                         derive_seed(config.pipeline.run_seed, kCompareStream));
  nlohmann::json j = cmp.to_json();
  j["report_a"] = report_stem(a);
  j["report_b"] = report_stem(b);
  const std::string stem = "compare_" + std::string(feature_mode_name(a.feature_mode)) + "_" +
                           balance_mode_name(a.balance_mode) + "_d" + std::to_string(a.reduced_dim);
  write_file_atomic(reports / (stem + ".json"), j.dump(2) + "\n");
  char line[160];
  std::snprintf(line, sizeof line, "compare: delta AUC %.4f, p = %.4f\n", cmp.delta_auc, cmp.p_value);
  log << line;
  return 0;
}

int cmd_serve(const RunConfig& config, std::ostream& log) {
  ensure_layout(config.work_dir);
  ApiServer server(config);
  const int port = server.bind(config.serve.bind, config.serve.port);
  if (port < 0) throw Error(Errc::io_failure, "serve.port", "cannot bind " + config.serve.bind + ":" +
                                                                  std::to_string(config.serve.port));
  log << "serving on http://" << config.serve.bind << ":" << port << "\n" << std::flush;
  return server.listen() ? 0 : 1;
}

}  // namespace pmcad
