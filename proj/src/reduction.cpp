#include "pmcad/reduction.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmcad/error.hpp"
#include "pmcad/rng.hpp"

namespace pmcad {

int jl_min_dim(long t, double epsilon) {
  if (t < 2) throw Error(Errc::invalid_argument, "t", "need at least two points");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(Errc::invalid_argument, "epsilon", "epsilon must lie in (0, 1)");
  const double bound = 4.0 * std::log(static_cast<double>(t)) /
                       (epsilon * epsilon / 2.0 - epsilon * epsilon * epsilon / 3.0);
  return static_cast<int>(std::ceil(bound));
}

double pairwise_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "b", "vectors differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

RandomProjection rp_generate(int k_in, int d_out, std::uint64_t seed) {
  if (k_in < 1) throw Error(Errc::invalid_argument, "k_in", "must be >= 1");
  if (d_out < 1 || d_out > k_in) throw Error(Errc::invalid_argument, "d_out", "must lie in [1, k_in]");
  RandomProjection rp{k_in, d_out, seed, Matrix(static_cast<std::size_t>(d_out), static_cast<std::size_t>(k_in))};
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_out));
  for (double& v : rp.matrix.data) v = scale * rng.normal();
  return rp;
}

std::vector<double> RandomProjection::project(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(k_in)) throw Error(Errc::dimension_mismatch, "x", "input length differs from k_in");
  std::vector<double> out(static_cast<std::size_t>(d_out), 0.0);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const auto row = matrix.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

Matrix RandomProjection::project(const Matrix& x) const {
  Matrix out;
  for (std::size_t r = 0; r < x.rows; ++r) out.append_row(project(x.row(r)));
  return out;
}

nlohmann::json RandomProjection::to_json() const {
  return {{"kind", "random_projection"}, {"k_in", k_in}, {"d_out", d_out}, {"seed", seed}, {"matrix", matrix.data}};
}

std::vector<double> rp_project(const RandomProjection& rp, std::span<const double> x) { return rp.project(x); }

PcaModel pca_fit(const Matrix& x, int d_out) {
  if (x.rows < 2) throw Error(Errc::invalid_argument, "x", "PCA needs at least two rows");
  if (d_out < 1 || static_cast<std::size_t>(d_out) > std::min(x.rows, x.cols)) {
    throw Error(Errc::invalid_argument, "d_out", "must lie in [1, min(n, k)]");
  }
  const auto n = static_cast<Eigen::Index>(x.rows), k = static_cast<Eigen::Index>(x.cols);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> data(x.data.data(), n, k);
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(Errc::invalid_argument, "x", "eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  PcaModel m;
  m.mean.assign(mean.data(), mean.data() + k);
  m.components = Matrix(static_cast<std::size_t>(d_out), x.cols);
  for (int i = 0; i < d_out; ++i) {
    const Eigen::Index col = k - 1 - i;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    for (Eigen::Index c = 0; c < k; ++c) m.components(static_cast<std::size_t>(i), static_cast<std::size_t>(c)) = v(c);
    m.explained_variance.push_back(std::max(0.0, solver.eigenvalues()(col)));
  }
  return m;
}

std::vector<double> PcaModel::transform(std::span<const double> x) const {
  if (x.size() != mean.size()) throw Error(Errc::dimension_mismatch, "x", "input length differs from model");
  std::vector<double> out(components.rows, 0.0);
  for (std::size_t r = 0; r < components.rows; ++r) {
    const auto row = components.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += row[c] * (x[c] - mean[c]);
    out[r] = s;
  }
  return out;
}

Matrix PcaModel::transform(const Matrix& x) const {
  Matrix out;
  for (std::size_t r = 0; r < x.rows; ++r) out.append_row(transform(x.row(r)));
  return out;
}

std::vector<double> PcaModel::reconstruct(std::span<const double> z) const {
  if (z.size() != components.rows) throw Error(Errc::dimension_mismatch, "z", "code length differs from model");
  std::vector<double> out = mean;
  for (std::size_t r = 0; r < components.rows; ++r) {
    const auto row = components.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += z[r] * row[c];
  }
  return out;
}

nlohmann::json PcaModel::to_json() const {
  return {{"kind", "pca"},
          {"k_in", mean.size()},
          {"d_out", components.rows},
          {"mean", mean},
          {"components", components.data},
          {"explained_variance", explained_variance}};
}

std::vector<double> pca_transform(const PcaModel& model, std::span<const double> x) { return model.transform(x); }

DistortionReport distortion_audit(const Matrix& original, const Matrix& projected, double epsilon) {
  if (original.rows != projected.rows) throw Error(Errc::dimension_mismatch, "projected", "point counts differ");
  if (original.rows < 2) throw Error(Errc::invalid_argument, "original", "need at least two points");
  DistortionReport rep;
  rep.epsilon = epsilon;
  std::size_t within = 0, nonzero = 0;
  double worst_dev = -1.0, dev_sum = 0.0;
  for (std::size_t i = 0; i < original.rows; ++i) {
    for (std::size_t j = i + 1; j < original.rows; ++j) {
      ++rep.n_pairs;
      const double d0 = std::pow(pairwise_distance(original.row(i), original.row(j)), 2);
      const double d1 = std::pow(pairwise_distance(projected.row(i), projected.row(j)), 2);
      if (d0 == 0.0) {
        ++within;
        continue;
      }
      if ((1.0 - epsilon) * d0 <= d1 && d1 <= (1.0 + epsilon) * d0) ++within;
      const double ratio = d1 / d0;
      const double dev = std::abs(ratio - 1.0);
      dev_sum += dev;
      ++nonzero;
      if (dev > worst_dev) {
        worst_dev = dev;
        rep.worst_ratio = ratio;
      }
    }
  }
  rep.fraction_within = static_cast<double>(within) / static_cast<double>(rep.n_pairs);
  rep.mean_distortion = nonzero > 0 ? dev_sum / static_cast<double>(nonzero) : 0.0;
  return rep;
}

}  // namespace pmcad
