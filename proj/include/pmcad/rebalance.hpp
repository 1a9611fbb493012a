#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pmcad/matrix.hpp"

namespace pmcad {

// Where a synthetic row came from: v = rows[base] + r * (rows[neighbor] - rows[base]).
struct SyntheticOrigin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double r = 0.0;
};

// Real rows first, in input order, then synthetic rows.
struct AugmentedDataset {
  Matrix rows;
  std::vector<int> labels;
  std::vector<bool> synthetic;
  std::vector<SyntheticOrigin> origins;

  std::size_t synthetic_count() const { return origins.size(); }
};

std::vector<double> smote_interpolate(std::span<const double> base, std::span<const double> neighbor, double r);

// Indices of the k nearest rows among `candidates` to row `query` (Euclidean),
// ties broken by lower index; `query` itself is excluded.
std::vector<std::size_t> nearest_neighbors(const Matrix& x, std::size_t query, std::span<const std::size_t> candidates,
                                           std::size_t k);

AugmentedDataset smote(const Matrix& x, std::span<const int> labels, int k_neighbors, std::uint64_t seed);

}  // namespace pmcad
