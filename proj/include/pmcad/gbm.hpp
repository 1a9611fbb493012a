#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "pmcad/matrix.hpp"

namespace pmcad {

struct GbmParams {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 2;
  std::uint64_t seed = 0;
};

void validate(const GbmParams& params);

// Flat regression tree. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
  int n_samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
};

struct GbmModel {
  double init_score = 0.0;
  std::vector<RegressionTree> trees;
  GbmParams params;
  std::size_t n_features = 0;
  // Mean logistic loss on the training set after each stage, stage 0 first.
  std::vector<double> training_loss;

  double margin(std::span<const double> x) const;
  nlohmann::json to_json() const;
};

GbmModel gbm_train(const Matrix& x, std::span<const int> y, const GbmParams& params = {});
double gbm_predict(const GbmModel& model, std::span<const double> x);
std::vector<double> gbm_predict_batch(const GbmModel& model, const Matrix& x);

double sigmoid(double z);

}  // namespace pmcad
