// pmcad: seeded segmentation, radiomics and LOCO evaluation over a case manifest.
#include <CLI11.hpp>

#include <iostream>

#include "pmcad/app.hpp"
#include "pmcad/error.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string work_dir;
  std::string manifest;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON configuration file");
    cmd->add_option("--seed", seed, "seed for phantom generation, propagation and evaluation");
    cmd->add_option("--mode", mode, "balance mode")->check(CLI::IsMember({"paper", "strict"}));
    cmd->add_option("--work-dir", work_dir, "work directory (overrides config)");
    cmd->add_option("--manifest", manifest, "dataset manifest CSV (overrides config)");
  }

  pmcad::RunConfig resolve() const {
    pmcad::RunConfig c = config.empty() ? pmcad::RunConfig{} : pmcad::load_run_config(config);
    if (seed) pmcad::apply_seed(c, *seed);
    if (!mode.empty()) c.pipeline.balance_mode = pmcad::parse_balance_mode(mode);
    if (!work_dir.empty()) c.work_dir = work_dir;
    if (!manifest.empty()) c.manifest = manifest;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pmcad - CT tumor segmentation, radiomics and classifier evaluation"};
  app.require_subcommand(1);

  CommonFlags phantom_flags, segment_flags, features_flags, evaluate_flags, serve_flags;
  int n_pm = -1, n_non = -1;
  std::vector<std::string> cases;
  std::string feature_mode, reducer;
  int dim = 0;
  bool compare = false;
  std::string bind, static_dir;
  int port = -1;

  auto* phantom = app.add_subcommand("phantom", "generate a synthetic phantom dataset in the work directory");
  phantom_flags.attach(phantom);
  phantom->add_option("--n-pm", n_pm, "number of PM-class cases");
  phantom->add_option("--n-non", n_non, "number of non-PM cases");

  auto* segment = app.add_subcommand("segment", "segment every seeded case");
  segment_flags.attach(segment);
  segment->add_option("--case", cases, "restrict to these case ids");

  auto* features = app.add_subcommand("features", "extract the 315-feature table from segmented cases");
  features_flags.attach(features);
  features->add_option("--feature-mode", feature_mode)->check(CLI::IsMember({"features_3d", "features_2d_largest_slice"}));

  auto* evaluate = app.add_subcommand("evaluate", "leave-one-case-out evaluation");
  evaluate_flags.attach(evaluate);
  evaluate->add_option("--feature-mode", feature_mode)->check(CLI::IsMember({"features_3d", "features_2d_largest_slice"}));
  evaluate->add_option("--reducer", reducer)->check(CLI::IsMember({"rpa", "pca", "none"}));
  evaluate->add_option("--dim", dim, "reduced dimension");
  evaluate->add_flag("--compare", compare, "run rpa and pca and compare their AUCs");

  auto* serve = app.add_subcommand("serve", "serve the annotation HTTP API");
  serve_flags.attach(serve);
  serve->add_option("--bind", bind);
  serve->add_option("--port", port);
  serve->add_option("--static-dir", static_dir, "directory of UI assets served at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (phantom->parsed()) {
      auto c = phantom_flags.resolve();
      if (n_pm >= 0) c.phantom_pm = n_pm;
      if (n_non >= 0) c.phantom_non_pm = n_non;
      return pmcad::cmd_phantom(c, std::cout);
    }
    if (segment->parsed()) return pmcad::cmd_segment(segment_flags.resolve(), cases, std::cout);
    if (features->parsed()) {
      auto c = features_flags.resolve();
      if (!feature_mode.empty()) c.pipeline.feature_mode = pmcad::parse_feature_mode(feature_mode);
      return pmcad::cmd_features(c, std::cout);
    }
    if (evaluate->parsed()) {
      auto c = evaluate_flags.resolve();
      if (!feature_mode.empty()) c.pipeline.feature_mode = pmcad::parse_feature_mode(feature_mode);
      if (!reducer.empty()) c.pipeline.reducer = pmcad::parse_reducer(reducer);
      if (dim > 0) c.pipeline.reduced_dim = dim;
      pmcad::validate(c.pipeline);
      return pmcad::cmd_evaluate(c, compare, std::cout);
    }
    if (serve->parsed()) {
      auto c = serve_flags.resolve();
      if (!bind.empty()) c.serve.bind = bind;
      if (port >= 0) c.serve.port = port;
      if (!static_dir.empty()) c.serve.static_dir = static_dir;
      return pmcad::cmd_serve(c, std::cout);
    }
  } catch (const pmcad::Error& e) {
    std::cerr << "error [" << pmcad::errc_name(e.code()) << "] " << e.field() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
