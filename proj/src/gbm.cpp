#include "pmcad/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "pmcad/error.hpp"

namespace pmcad {

namespace {

constexpr double kMinGain = 1e-14;
constexpr double kHessianFloor = 1e-12;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = kMinGain;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<double>& grad, const GbmParams& params)
      : x_(x), grad_(grad), params_(params) {}

  RegressionTree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    grow(std::move(samples), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> samples, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[static_cast<std::size_t>(id)].n_samples = static_cast<int>(samples.size());

    const SplitChoice split = depth < params_.max_depth ? best_split(samples) : SplitChoice{};
    if (split.feature < 0) {
      tree_.nodes[static_cast<std::size_t>(id)].value = leaf_value(samples);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t s : samples) {
      (x_(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(s);
    }
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Exact greedy search maximizing squared-error reduction. A later candidate
  // must be strictly better, so ties resolve to the lowest feature index and
  // then the lowest threshold.
  SplitChoice best_split(const std::vector<std::size_t>& samples) const {
    SplitChoice best;
    const auto n = samples.size();
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    if (n < 2 * min_leaf) return best;
    double total = 0.0;
    for (std::size_t s : samples) total += grad_[s];
    const double parent = total * total / static_cast<double>(n);

    std::vector<std::size_t> order(samples);
    for (std::size_t f = 0; f < x_.cols; ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_(a, f) < x_(b, f) || (x_(a, f) == x_(b, f) && a < b);
      });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += grad_[order[i]];
        const double lo = x_(order[i], f), hi = x_(order[i + 1], f);
        const std::size_t nl = i + 1, nr = n - nl;
        if (lo == hi || nl < min_leaf || nr < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = {static_cast<int>(f), threshold, gain};
        }
      }
    }
    return best;
  }

  // One Newton step for the logistic loss: sum g / sum p(1 - p).
  double leaf_value(const std::vector<std::size_t>& samples) const {
    double num = 0.0, den = 0.0;
    for (std::size_t s : samples) {
      const double g = grad_[s];
      num += g;
      den += std::abs(g) * (1.0 - std::abs(g));
    }
    return num / std::max(den, kHessianFloor);
  }

  const Matrix& x_;
  const std::vector<double>& grad_;
  const GbmParams& params_;
  RegressionTree tree_;
};

double logistic_loss(std::span<const int> y, std::span<const double> margin) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // log(1 + e^F) - y F, evaluated stably.
    const double f = margin[i];
    const double softplus = f > 0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    loss += softplus - (y[i] != 0 ? f : 0.0);
  }
  return loss / static_cast<double>(y.size());
}

nlohmann::json node_json(const RegressionTree& tree, int id) {
  const TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return {{"leaf", n.value}, {"n_samples", n.n_samples}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"n_samples", n.n_samples},
          {"left", node_json(tree, n.left)},
          {"right", node_json(tree, n.right)}};
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void validate(const GbmParams& p) {
  if (p.n_trees < 0) throw Error(Errc::invalid_argument, "n_trees", "must be >= 0");
  if (p.max_depth < 1) throw Error(Errc::invalid_argument, "max_depth", "must be >= 1");
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) {
    throw Error(Errc::invalid_argument, "learning_rate", "must lie in (0, 1]");
  }
  if (p.min_leaf < 1) throw Error(Errc::invalid_argument, "min_leaf", "must be >= 1");
}

double RegressionTree::predict(std::span<const double> x) const {
  int id = 0;
  while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(id)].value;
}

int RegressionTree::depth() const {
  std::function<int(int)> d = [&](int id) -> int {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    return n.is_leaf() ? 0 : 1 + std::max(d(n.left), d(n.right));
  };
  return nodes.empty() ? 0 : d(0);
}

double GbmModel::margin(std::span<const double> x) const {
  if (x.size() != n_features) throw Error(Errc::dimension_mismatch, "x", "feature count differs from training");
  double f = init_score;
  for (const RegressionTree& t : trees) f += params.learning_rate * t.predict(x);
  return f;
}

nlohmann::json GbmModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const RegressionTree& t : trees) trees_json.push_back(node_json(t, 0));
  return {{"init_score", init_score},
          {"n_features", n_features},
          {"params",
           {{"n_trees", params.n_trees},
            {"max_depth", params.max_depth},
            {"learning_rate", params.learning_rate},
            {"min_leaf", params.min_leaf},
            {"seed", params.seed}}},
          {"trees", trees_json}};
}

GbmModel gbm_train(const Matrix& x, std::span<const int> y, const GbmParams& params) {
  validate(params);
  if (x.rows == 0 || x.cols == 0) throw Error(Errc::empty_input, "x", "empty training matrix");
  if (y.size() != x.rows) throw Error(Errc::dimension_mismatch, "y", "label count differs from row count");
  const auto positives = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  if (positives == 0 || positives == y.size()) throw Error(Errc::single_class, "y", "both classes must be present");

  GbmModel model;
  model.params = params;
  model.n_features = x.cols;
  const double prevalence = static_cast<double>(positives) / static_cast<double>(y.size());
  model.init_score = std::log(prevalence / (1.0 - prevalence));

  std::vector<double> margin(x.rows, model.init_score), grad(x.rows);
  std::vector<std::size_t> all(x.rows);
  std::iota(all.begin(), all.end(), 0);
  model.training_loss.push_back(logistic_loss(y, margin));

  TreeBuilder builder(x, grad, params);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < x.rows; ++i) grad[i] = (y[i] != 0 ? 1.0 : 0.0) - sigmoid(margin[i]);
    RegressionTree tree = builder.build(all);
    for (std::size_t i = 0; i < x.rows; ++i) margin[i] += params.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    model.training_loss.push_back(logistic_loss(y, margin));
  }
  return model;
}

double gbm_predict(const GbmModel& model, std::span<const double> x) {
  // Clamp keeps the score strictly inside (0, 1) in double precision.
  const double p = sigmoid(model.margin(x));
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

std::vector<double> gbm_predict_batch(const GbmModel& model, const Matrix& x) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = gbm_predict(model, x.row(i));
  return out;
}

}  // namespace pmcad
