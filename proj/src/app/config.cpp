#include <fstream>

#include "pmcad/app.hpp"
#include "pmcad/error.hpp"

namespace fs = std::filesystem;

namespace pmcad {

namespace {

nlohmann::json segmentation_to_json(const SegmentationParams& p) {
  return {{"wiener_window", p.wiener_window},
          {"seed_window", p.seed_window},
          {"beta", p.beta},
          {"max_layers", p.max_layers},
          {"contour_iterations", p.contour_iterations},
          {"contour_band_px", p.contour_band_px},
          {"contour_smoothing", p.contour_smoothing},
          {"contour_rounds", p.contour_rounds},
          {"propagation_bound_px", p.propagation_bound_px},
          {"min_slice_area", p.min_slice_area},
          {"extra_seed_window", p.extra_seed_window},
          {"run_seed", p.run_seed}};
}

SegmentationParams segmentation_from_json(const nlohmann::json& j, SegmentationParams p) {
  p.wiener_window = j.value("wiener_window", p.wiener_window);
  p.seed_window = j.value("seed_window", p.seed_window);
  p.beta = j.value("beta", p.beta);
  p.max_layers = j.value("max_layers", p.max_layers);
  p.contour_iterations = j.value("contour_iterations", p.contour_iterations);
  p.contour_band_px = j.value("contour_band_px", p.contour_band_px);
  p.contour_smoothing = j.value("contour_smoothing", p.contour_smoothing);
  p.contour_rounds = j.value("contour_rounds", p.contour_rounds);
  p.propagation_bound_px = j.value("propagation_bound_px", p.propagation_bound_px);
  p.min_slice_area = j.value("min_slice_area", p.min_slice_area);
  p.extra_seed_window = j.value("extra_seed_window", p.extra_seed_window);
  p.run_seed = j.value("run_seed", p.run_seed);
  return p;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

fs::path RunConfig::manifest_path() const {
  return manifest.empty() ? work_dir / "dataset" / "manifest.csv" : manifest;
}

RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw Error(Errc::bad_header, "config", "configuration must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("manifest")) c.manifest = resolve(base_dir, j["manifest"].get<std::string>());
    if (j.contains("work_dir")) c.work_dir = resolve(base_dir, j["work_dir"].get<std::string>());
    else if (!base_dir.empty()) c.work_dir = base_dir / c.work_dir;
    if (j.contains("pipeline")) c.pipeline = pipeline_config_from_json(j["pipeline"], c.pipeline);
    if (j.contains("segmentation")) c.segmentation = segmentation_from_json(j["segmentation"], c.segmentation);
    if (j.contains("phantom")) {
      const auto& p = j["phantom"];
      c.phantom = phantom_spec_from_json(p);
      c.phantom_pm = p.value("n_pm", c.phantom_pm);
      c.phantom_non_pm = p.value("n_non_pm", c.phantom_non_pm);
    }
    if (j.contains("serve")) {
      const auto& s = j["serve"];
      c.serve.bind = s.value("bind", c.serve.bind);
      c.serve.port = s.value("port", c.serve.port);
      if (s.contains("static_dir")) c.serve.static_dir = resolve(base_dir, s["static_dir"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, "config", e.what());
  }
  validate(c.pipeline);
  if (c.phantom) validate(*c.phantom);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, path.string(), "cannot open config");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_header, path.string(), e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"manifest", c.manifest.generic_string()},
                   {"work_dir", c.work_dir.generic_string()},
                   {"pipeline", to_json(c.pipeline)},
                   {"segmentation", segmentation_to_json(c.segmentation)},
                   {"serve",
                    {{"bind", c.serve.bind}, {"port", c.serve.port}, {"static_dir", c.serve.static_dir.generic_string()}}}};
  if (c.phantom) {
    j["phantom"] = to_json(*c.phantom);
    j["phantom"]["n_pm"] = c.phantom_pm;
    j["phantom"]["n_non_pm"] = c.phantom_non_pm;
  }
  return j;
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
  if (!c.phantom) c.phantom = PhantomSpec{};
  c.phantom->seed = seed;
  c.segmentation.run_seed = seed;
  c.pipeline.run_seed = seed;
}

}  // namespace pmcad
