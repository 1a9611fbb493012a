#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pmcad/gbm.hpp"
#include "pmcad/matrix.hpp"
#include "pmcad/radiomics.hpp"
#include "pmcad/reduction.hpp"

namespace pmcad {

enum class ReducerKind { rpa, pca, none };
enum class FeatureMode { features_3d, features_2d_largest_slice };
enum class BalanceMode { paper, strict };
// Feature space SMOTE runs in during strict mode; paper mode always
// oversamples the full normalized feature space before the folds.
enum class SmoteSpace { reduced, full };

struct PipelineConfig {
  ReducerKind reducer = ReducerKind::rpa;
  int reduced_dim = 20;
  FeatureMode feature_mode = FeatureMode::features_3d;
  BalanceMode balance_mode = BalanceMode::strict;
  SmoteSpace smote_space = SmoteSpace::reduced;
  int smote_k = 5;
  GbmParams gbm;
  std::uint64_t run_seed = 0;
  double threshold = 0.5;
  int bootstrap_resamples = 1000;
  // Echoed into report metadata when non-empty; wall-clock time is never
  // read so reports stay reproducible.
  std::string timestamp;
};

void validate(const PipelineConfig& config);
nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

const char* reducer_name(ReducerKind r);
const char* feature_mode_name(FeatureMode m);
const char* balance_mode_name(BalanceMode m);
ReducerKind parse_reducer(const std::string& s);
FeatureMode parse_feature_mode(const std::string& s);
BalanceMode parse_balance_mode(const std::string& s);

struct Dataset {
  std::vector<std::string> case_ids;
  Matrix x;
  std::vector<int> labels;
  std::vector<bool> synthetic;

  std::size_t size() const { return labels.size(); }
  std::vector<std::size_t> real_indices() const;
};

using Reducer = std::variant<std::monostate, RandomProjection, PcaModel>;

// Everything one fold learns from its training rows.
struct FoldModel {
  Normalizer normalizer;
  Reducer reducer;
  GbmModel gbm;
  std::size_t smote_synthetics = 0;

  std::vector<double> reduce(std::span<const double> normalized) const;
  double score(std::span<const double> raw) const;
  nlohmann::json to_json() const;
};

std::uint64_t fold_seed(std::uint64_t run_seed, std::size_t fold_index);

// Strict-mode fold: fits normalizer, reducer, SMOTE and GBM on the real cases
// other than `held_out`.
FoldModel train_strict_fold(const Dataset& data, const PipelineConfig& config, std::size_t held_out);

struct CaseScore {
  std::string case_id;
  int label = 0;
  double score = 0.0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct EvaluationReport {
  std::vector<CaseScore> cases;
  std::vector<RocPoint> roc;
  double auc = 0.0;
  double auc_std = 0.0;
  double accuracy = 0.0;
  PipelineConfig config;
  std::size_t fold_count = 0;

  nlohmann::json to_json() const;
  std::string scores_csv() const;
  std::string roc_csv() const;
};

EvaluationReport loco_evaluate(const Dataset& data, const PipelineConfig& config);

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const double> scores, std::span<const int> labels);
double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);
double bootstrap_auc_std(std::span<const double> scores, std::span<const int> labels, int resamples,
                         std::uint64_t seed);

struct RunComparison {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double delta_auc = 0.0;
  double p_value = 1.0;
  int resamples = 0;
  nlohmann::json to_json() const;
};

RunComparison compare_runs(const EvaluationReport& a, const EvaluationReport& b, int resamples, std::uint64_t seed);

}  // namespace pmcad
