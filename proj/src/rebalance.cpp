#include "pmcad/rebalance.hpp"

#include <algorithm>

#include "pmcad/error.hpp"
#include "pmcad/reduction.hpp"
#include "pmcad/rng.hpp"

namespace pmcad {

std::vector<double> smote_interpolate(std::span<const double> base, std::span<const double> neighbor, double r) {
  if (base.size() != neighbor.size()) throw Error(Errc::dimension_mismatch, "neighbor", "row lengths differ");
  std::vector<double> v(base.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = base[i] + r * (neighbor[i] - base[i]);
  return v;
}

std::vector<std::size_t> nearest_neighbors(const Matrix& x, std::size_t query, std::span<const std::size_t> candidates,
                                           std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t c : candidates) {
    if (c == query) continue;
    d.emplace_back(pairwise_distance(x.row(query), x.row(c)), c);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, d.size()); ++i) out.push_back(d[i].second);
  return out;
}

AugmentedDataset smote(const Matrix& x, std::span<const int> labels, int k_neighbors, std::uint64_t seed) {
  if (labels.size() != x.rows) throw Error(Errc::dimension_mismatch, "labels", "label count differs from row count");
  if (k_neighbors < 1) throw Error(Errc::invalid_argument, "k_neighbors", "must be >= 1");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] != 0 ? pos : neg).push_back(i);

  AugmentedDataset out{x, std::vector<int>(labels.begin(), labels.end()), std::vector<bool>(x.rows, false), {}};
  if (pos.size() == neg.size()) return out;
  const bool minority_positive = pos.size() < neg.size();
  const std::vector<std::size_t>& minority = minority_positive ? pos : neg;
  const std::size_t needed = (minority_positive ? neg.size() : pos.size()) - minority.size();
  if (minority.size() < 2) throw Error(Errc::single_class, "labels", "minority class needs at least two members");

  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), minority.size() - 1);
  std::vector<std::vector<std::size_t>> neighbors(minority.size());
  for (std::size_t m = 0; m < minority.size(); ++m) neighbors[m] = nearest_neighbors(x, minority[m], minority, k);

  Rng rng(seed);
  const int minority_label = minority_positive ? 1 : 0;
  for (std::size_t s = 0; s < needed; ++s) {
    const std::size_t m = rng.uniform_index(minority.size());
    const std::size_t nn = neighbors[m][rng.uniform_index(neighbors[m].size())];
    const double r = rng.uniform01();
    out.rows.append_row(smote_interpolate(x.row(minority[m]), x.row(nn), r));
    out.labels.push_back(minority_label);
    out.synthetic.push_back(true);
    out.origins.push_back({minority[m], nn, r});
  }
  return out;
}

}  // namespace pmcad
