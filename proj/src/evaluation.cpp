#include "pmcad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "pmcad/error.hpp"
#include "pmcad/parallel.hpp"
#include "pmcad/rebalance.hpp"
#include "pmcad/rng.hpp"

namespace pmcad {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075ULL;
constexpr std::uint64_t kSmoteStream = 1;

void require_both_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::dimension_mismatch, "labels", "score and label counts differ");
  const bool has_pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
  const bool has_neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
  if (!has_pos || !has_neg) throw Error(Errc::single_class, "labels", "both classes must be present");
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Reducer fit_reducer(const PipelineConfig& config, const Matrix& train, std::uint64_t seed) {
  switch (config.reducer) {
    case ReducerKind::rpa:
      return rp_generate(static_cast<int>(train.cols), config.reduced_dim, seed);
    case ReducerKind::pca:
      return pca_fit(train, config.reduced_dim);
    case ReducerKind::none:
      return std::monostate{};
  }
  return std::monostate{};
}

Matrix apply_reducer(const Reducer& reducer, const Matrix& x) {
  if (const auto* rp = std::get_if<RandomProjection>(&reducer)) return rp->project(x);
  if (const auto* pca = std::get_if<PcaModel>(&reducer)) return pca->transform(x);
  return x;
}

std::vector<int> select_labels(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

}  // namespace

const char* reducer_name(ReducerKind r) {
  switch (r) {
    case ReducerKind::rpa: return "rpa";
    case ReducerKind::pca: return "pca";
    case ReducerKind::none: return "none";
  }
  return "unknown";
}

const char* feature_mode_name(FeatureMode m) {
  return m == FeatureMode::features_3d ? "features_3d" : "features_2d_largest_slice";
}

const char* balance_mode_name(BalanceMode m) { return m == BalanceMode::paper ? "paper" : "strict"; }

ReducerKind parse_reducer(const std::string& s) {
  if (s == "rpa") return ReducerKind::rpa;
  if (s == "pca") return ReducerKind::pca;
  if (s == "none") return ReducerKind::none;
  throw Error(Errc::invalid_argument, "reducer", "unknown reducer '" + s + "'");
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "features_3d") return FeatureMode::features_3d;
  if (s == "features_2d_largest_slice") return FeatureMode::features_2d_largest_slice;
  throw Error(Errc::invalid_argument, "feature_mode", "unknown feature mode '" + s + "'");
}

BalanceMode parse_balance_mode(const std::string& s) {
  if (s == "paper") return BalanceMode::paper;
  if (s == "strict") return BalanceMode::strict;
  throw Error(Errc::invalid_argument, "balance_mode", "unknown balance mode '" + s + "'");
}

void validate(const PipelineConfig& c) {
  if (c.reduced_dim < 1) throw Error(Errc::invalid_argument, "reduced_dim", "must be >= 1");
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw Error(Errc::invalid_argument, "threshold", "must lie in (0, 1)");
  if (c.smote_k < 1) throw Error(Errc::invalid_argument, "smote_k", "must be >= 1");
  if (c.bootstrap_resamples < 2) throw Error(Errc::invalid_argument, "bootstrap_resamples", "must be >= 2");
  validate(c.gbm);
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {{"reducer", reducer_name(c.reducer)},
          {"reduced_dim", c.reduced_dim},
          {"feature_mode", feature_mode_name(c.feature_mode)},
          {"balance_mode", balance_mode_name(c.balance_mode)},
          {"smote_space", c.smote_space == SmoteSpace::reduced ? "reduced" : "full"},
          {"smote_k", c.smote_k},
          {"gbm",
           {{"n_trees", c.gbm.n_trees},
            {"max_depth", c.gbm.max_depth},
            {"learning_rate", c.gbm.learning_rate},
            {"min_leaf", c.gbm.min_leaf},
            {"seed", c.gbm.seed}}},
          {"run_seed", c.run_seed},
          {"threshold", c.threshold},
          {"bootstrap_resamples", c.bootstrap_resamples}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig c) {
  if (j.contains("reducer")) c.reducer = parse_reducer(j["reducer"].get<std::string>());
  if (j.contains("reduced_dim")) c.reduced_dim = j["reduced_dim"].get<int>();
  if (j.contains("feature_mode")) c.feature_mode = parse_feature_mode(j["feature_mode"].get<std::string>());
  if (j.contains("balance_mode")) c.balance_mode = parse_balance_mode(j["balance_mode"].get<std::string>());
  if (j.contains("smote_space")) {
    const auto s = j["smote_space"].get<std::string>();
    if (s != "reduced" && s != "full") throw Error(Errc::invalid_argument, "smote_space", "expected reduced|full");
    c.smote_space = s == "reduced" ? SmoteSpace::reduced : SmoteSpace::full;
  }
  if (j.contains("smote_k")) c.smote_k = j["smote_k"].get<int>();
  if (j.contains("run_seed")) c.run_seed = j["run_seed"].get<std::uint64_t>();
  if (j.contains("threshold")) c.threshold = j["threshold"].get<double>();
  if (j.contains("bootstrap_resamples")) c.bootstrap_resamples = j["bootstrap_resamples"].get<int>();
  if (j.contains("gbm")) {
    const auto& g = j["gbm"];
    c.gbm.n_trees = g.value("n_trees", c.gbm.n_trees);
    c.gbm.max_depth = g.value("max_depth", c.gbm.max_depth);
    c.gbm.learning_rate = g.value("learning_rate", c.gbm.learning_rate);
    c.gbm.min_leaf = g.value("min_leaf", c.gbm.min_leaf);
    c.gbm.seed = g.value("seed", c.gbm.seed);
  }
  return c;
}

std::vector<std::size_t> Dataset::real_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (synthetic.empty() || !synthetic[i]) out.push_back(i);
  }
  return out;
}

std::uint64_t fold_seed(std::uint64_t run_seed, std::size_t fold_index) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(fold_index));
}

std::vector<double> FoldModel::reduce(std::span<const double> normalized) const {
  if (const auto* rp = std::get_if<RandomProjection>(&reducer)) return rp->project(normalized);
  if (const auto* pca = std::get_if<PcaModel>(&reducer)) return pca->transform(normalized);
  return {normalized.begin(), normalized.end()};
}

double FoldModel::score(std::span<const double> raw) const {
  const auto normalized = normalizer.apply(raw);
  return gbm_predict(gbm, reduce(normalized));
}

nlohmann::json FoldModel::to_json() const {
  nlohmann::json r = nullptr;
  if (const auto* rp = std::get_if<RandomProjection>(&reducer)) r = rp->to_json();
  if (const auto* pca = std::get_if<PcaModel>(&reducer)) r = pca->to_json();
  return {{"normalizer", normalizer.to_json()},
          {"reducer", r},
          {"smote_synthetics", smote_synthetics},
          {"gbm", gbm.to_json()}};
}

FoldModel train_strict_fold(const Dataset& data, const PipelineConfig& config, std::size_t held_out) {
  std::vector<std::size_t> train_idx;
  for (std::size_t i : data.real_indices()) {
    if (i != held_out) train_idx.push_back(i);
  }
  const std::uint64_t seed = fold_seed(config.run_seed, held_out);
  FoldModel fold;
  const Matrix raw = data.x.select_rows(train_idx);
  const std::vector<int> labels = select_labels(data.labels, train_idx);
  fold.normalizer = fit_normalizer(raw);
  Matrix train = fold.normalizer.apply(raw);

  AugmentedDataset augmented;
  if (config.smote_space == SmoteSpace::full) {
    augmented = smote(train, labels, config.smote_k, derive_seed(seed, kSmoteStream));
    fold.reducer = fit_reducer(config, augmented.rows, seed);
    augmented.rows = apply_reducer(fold.reducer, augmented.rows);
  } else {
    fold.reducer = fit_reducer(config, train, seed);
    augmented = smote(apply_reducer(fold.reducer, train), labels, config.smote_k, derive_seed(seed, kSmoteStream));
  }
  fold.smote_synthetics = augmented.synthetic_count();
  GbmParams gbm = config.gbm;
  fold.gbm = gbm_train(augmented.rows, augmented.labels, gbm);
  return fold;
}

namespace {

void require_evaluable(const Dataset& data) {
  if (data.x.rows != data.size() || data.case_ids.size() != data.size()) {
    throw Error(Errc::dimension_mismatch, "dataset", "case ids, rows and labels differ in count");
  }
  if (!data.synthetic.empty() && data.synthetic.size() != data.size()) {
    throw Error(Errc::dimension_mismatch, "synthetic", "synthetic flags differ in count");
  }
  std::size_t pos = 0, neg = 0;
  for (std::size_t i : data.real_indices()) (data.labels[i] != 0 ? pos : neg)++;
  if (pos < 2 || neg < 2) throw Error(Errc::single_class, "labels", "need at least two real cases per class");
}

}  // namespace

EvaluationReport loco_evaluate(const Dataset& data, const PipelineConfig& config) {
  validate(config);
  require_evaluable(data);
  EvaluationReport report;
  report.config = config;

  const std::vector<std::size_t> real = data.real_indices();
  std::vector<double> scores(real.size());

  if (config.balance_mode == BalanceMode::strict) {
    report.fold_count = real.size();
    parallel_for(real.size(), [&](std::size_t k) {
      const FoldModel fold = train_strict_fold(data, config, real[k]);
      scores[k] = fold.score(data.x.row(real[k]));
    });
  } else {
    // Dataset-level normalization and oversampling, then LOCO over every
    // balanced row; only real cases are scored into the report.
    const Matrix raw = data.x.select_rows(real);
    const Normalizer normalizer = fit_normalizer(raw);
    const AugmentedDataset balanced = smote(normalizer.apply(raw), select_labels(data.labels, real), config.smote_k,
                                            derive_seed(config.run_seed, kSmoteStream));
    const std::size_t n = balanced.rows.rows;
    report.fold_count = n;
    std::vector<double> all_scores(n);
    parallel_for(n, [&](std::size_t held_out) {
      std::vector<std::size_t> train_idx;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != held_out) train_idx.push_back(i);
      }
      const Matrix train = balanced.rows.select_rows(train_idx);
      const Reducer reducer = fit_reducer(config, train, fold_seed(config.run_seed, held_out));
      const GbmModel gbm = gbm_train(apply_reducer(reducer, train), select_labels(balanced.labels, train_idx), config.gbm);
      FoldModel view{normalizer, reducer, gbm, 0};
      all_scores[held_out] = gbm_predict(gbm, view.reduce(balanced.rows.row(held_out)));
    });
    std::copy_n(all_scores.begin(), real.size(), scores.begin());
  }

  std::vector<int> labels;
  for (std::size_t k = 0; k < real.size(); ++k) {
    report.cases.push_back({data.case_ids[real[k]], data.labels[real[k]], scores[k]});
    labels.push_back(data.labels[real[k]]);
  }
  report.roc = roc_points(scores, labels);
  report.auc = auc(scores, labels);
  report.auc_std = bootstrap_auc_std(scores, labels, config.bootstrap_resamples,
                                     derive_seed(config.run_seed, kBootstrapStream));
  report.accuracy = accuracy_at(scores, labels, config.threshold);
  return report;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json cases_json = nlohmann::json::array();
  for (const CaseScore& c : cases) cases_json.push_back({{"case_id", c.case_id}, {"label", c.label}, {"score", c.score}});
  nlohmann::json roc_json = nlohmann::json::array();
  for (const RocPoint& p : roc) roc_json.push_back({p.fpr, p.tpr});
  nlohmann::json meta{{"run_seed", config.run_seed}, {"fold_count", fold_count}, {"n_cases", cases.size()}};
  if (!config.timestamp.empty()) meta["timestamp"] = config.timestamp;
  return {{"config", pmcad::to_json(config)},
          {"metadata", meta},
          {"auc", auc},
          {"auc_std", auc_std},
          {"accuracy", accuracy},
          {"threshold", config.threshold},
          {"cases", cases_json},
          {"roc", roc_json}};
}

std::string EvaluationReport::scores_csv() const {
  std::ostringstream out;
  out << "case_id,label,score\n";
  for (const CaseScore& c : cases) out << c.case_id << ',' << c.label << ',' << fmt9(c.score) << '\n';
  return out.str();
}

std::string EvaluationReport::roc_csv() const {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const RocPoint& p : roc) out << fmt9(p.fpr) << ',' << fmt9(p.tpr) << '\n';
  return out.str();
}

std::vector<RocPoint> roc_points(std::span<const double> scores, std::span<const int> labels) {
  require_both_classes(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double p = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const double n = static_cast<double>(labels.size()) - p;
  std::vector<RocPoint> pts{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    // Consume every case sharing this threshold.
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] != 0 ? tp : fp) += 1.0;
    pts.push_back({fp / n, tp / p});
  }
  return pts;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto pts = roc_points(scores, labels);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
  }
  return area;
}

double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw Error(Errc::dimension_mismatch, "labels", "score and label counts differ");
  if (scores.empty()) throw Error(Errc::empty_input, "scores", "no scores");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == (labels[i] != 0);
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {

// Draws a case resample containing both classes; rejects up to 100 times.
std::vector<std::size_t> draw_resample(Rng& rng, std::span<const int> labels) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  for (int attempt = 0; attempt <= 100; ++attempt) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      idx[i] = rng.uniform_index(n);
      (labels[idx[i]] != 0 ? pos : neg) = true;
    }
    if (pos && neg) return idx;
  }
  throw Error(Errc::resample_failure, "labels", "bootstrap resamples repeatedly missed a class");
}

double resampled_auc(std::span<const double> scores, std::span<const int> labels, const std::vector<std::size_t>& idx) {
  std::vector<double> s;
  std::vector<int> l;
  for (std::size_t i : idx) {
    s.push_back(scores[i]);
    l.push_back(labels[i]);
  }
  return auc(s, l);
}

}  // namespace

double bootstrap_auc_std(std::span<const double> scores, std::span<const int> labels, int resamples,
                         std::uint64_t seed) {
  if (resamples < 2) throw Error(Errc::invalid_argument, "resamples", "need at least two resamples");
  require_both_classes(scores, labels);
  Rng rng(seed);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) values.push_back(resampled_auc(scores, labels, draw_resample(rng, labels)));
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

nlohmann::json RunComparison::to_json() const {
  return {{"auc_a", auc_a}, {"auc_b", auc_b}, {"delta_auc", delta_auc}, {"p_value", p_value}, {"resamples", resamples}};
}

RunComparison compare_runs(const EvaluationReport& a, const EvaluationReport& b, int resamples, std::uint64_t seed) {
  if (resamples < 2) throw Error(Errc::invalid_argument, "resamples", "need at least two resamples");
  std::map<std::string, const CaseScore*> by_id;
  for (const CaseScore& c : b.cases) by_id[c.case_id] = &c;
  if (by_id.size() != a.cases.size() || b.cases.size() != a.cases.size()) {
    throw Error(Errc::case_mismatch, "cases", "reports cover different case sets");
  }
  std::vector<double> sa, sb;
  std::vector<int> labels;
  for (const CaseScore& c : a.cases) {
    const auto it = by_id.find(c.case_id);
    if (it == by_id.end()) throw Error(Errc::case_mismatch, "cases", "case " + c.case_id + " missing from second report");
    if (it->second->label != c.label) throw Error(Errc::case_mismatch, "label", "labels differ for " + c.case_id);
    sa.push_back(c.score);
    sb.push_back(it->second->score);
    labels.push_back(c.label);
  }
  RunComparison out;
  out.resamples = resamples;
  out.auc_a = auc(sa, labels);
  out.auc_b = auc(sb, labels);
  out.delta_auc = out.auc_a - out.auc_b;
  if (out.delta_auc == 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double sign = out.delta_auc > 0 ? 1.0 : -1.0;
  Rng rng(seed);
  int flips = 0;
  for (int r = 0; r < resamples; ++r) {
    const auto idx = draw_resample(rng, labels);
    const double delta = resampled_auc(sa, labels, idx) - resampled_auc(sb, labels, idx);
    flips += delta * sign <= 0.0;
  }
  out.p_value = std::min(1.0, 2.0 * (1.0 + flips) / (1.0 + resamples));
  return out;
}

}  // namespace pmcad
