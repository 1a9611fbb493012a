#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pmcad/matrix.hpp"

namespace pmcad {

// Smallest d with d >= 4 ln t / (eps^2/2 - eps^3/3).
int jl_min_dim(long t, double epsilon);

double pairwise_distance(std::span<const double> a, std::span<const double> b);

struct RandomProjection {
  int k_in = 0;
  int d_out = 0;
  std::uint64_t seed = 0;
  // d_out x k_in, entries i.i.d. N(0, 1/d_out).
  Matrix matrix;

  std::vector<double> project(std::span<const double> x) const;
  Matrix project(const Matrix& x) const;
  nlohmann::json to_json() const;
};

RandomProjection rp_generate(int k_in, int d_out, std::uint64_t seed);
std::vector<double> rp_project(const RandomProjection& rp, std::span<const double> x);

struct PcaModel {
  std::vector<double> mean;
  // d_out x k, orthonormal rows.
  Matrix components;
  std::vector<double> explained_variance;

  std::vector<double> transform(std::span<const double> x) const;
  Matrix transform(const Matrix& x) const;
  std::vector<double> reconstruct(std::span<const double> z) const;
  nlohmann::json to_json() const;
};

PcaModel pca_fit(const Matrix& x, int d_out);
std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x);

struct DistortionReport {
  double epsilon = 0.0;
  std::size_t n_pairs = 0;
  double fraction_within = 0.0;
  // Squared-distance ratio of the pair furthest from 1.
  double worst_ratio = 1.0;
  // Mean |ratio - 1| over pairs with nonzero original distance.
  double mean_distortion = 0.0;
};

DistortionReport distortion_audit(const Matrix& original, const Matrix& projected, double epsilon);

}  // namespace pmcad
