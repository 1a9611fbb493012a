#include "pmcad/reduction.hpp"
#include "support.hpp"

using namespace pmcad;
using testing::near;

namespace {

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t k, double scale = 1.0) {
  Matrix m(n, k);
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < m.rows; ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
  return out;
}

std::vector<std::vector<double>> covariance(const Matrix& x) {
  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x(r, c) / x.rows;
  std::vector<std::vector<double>> cov(x.cols, std::vector<double>(x.cols, 0.0));
  for (std::size_t i = 0; i < x.cols; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      double s = 0;
      for (std::size_t r = 0; r < x.rows; ++r) s += (x(r, i) - mean[i]) * (x(r, j) - mean[j]);
      cov[i][j] = s / (x.rows - 1.0);
    }
  return cov;
}

}  // namespace

TEST_CASE("jl_min_dim") {
  CHECK(jl_min_dim(100, 0.5) == 222);
  CHECK(jl_min_dim(200, 0.5) == 255);
  CHECK_ERRC(jl_min_dim(100, 0.0), Errc::invalid_argument);
  CHECK_ERRC(jl_min_dim(100, 1.0), Errc::invalid_argument);
  CHECK_ERRC(jl_min_dim(1, 0.5), Errc::invalid_argument);
  for (double eps : {0.1, 0.3, 0.5, 0.9}) {
    int prev = 0;
    for (long t = 2; t < 400; t += 7) {
      const int d = jl_min_dim(t, eps);
      CHECK(d >= prev);
      // smallest integer at or above the bound
      const double bound = 4 * std::log(double(t)) / (eps * eps / 2 - eps * eps * eps / 3);
      CHECK(d >= bound);
      CHECK(d - 1 < bound);
      prev = d;
    }
  }
}

TEST_CASE("pairwise_distance") {
  const std::vector<double> a{0, 0}, b{3, 4};
  CHECK(pairwise_distance(a, b) == 5.0);
  CHECK(pairwise_distance(b, b) == 0.0);
  CHECK_ERRC(pairwise_distance(a, std::vector<double>{1}), Errc::dimension_mismatch);
  Rng rng(1);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = rng.uniform_int(1, 40);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = rng.normal() * 10;
    for (auto& v : y) v = rng.normal() * 10;
    long double s = 0;
    for (std::size_t i = n; i-- > 0;) s += (long double)(x[i] - y[i]) * (x[i] - y[i]);
    CHECK(near(pairwise_distance(x, y), std::sqrt(double(s)), 1e-12));
  }
}

TEST_CASE("random projection matrix: determinism, moments, bounds") {
  CHECK(rp_generate(315, 20, 9).matrix == rp_generate(315, 20, 9).matrix);
  CHECK(rp_generate(315, 20, 9).matrix != rp_generate(315, 20, 10).matrix);
  CHECK(rp_generate(6, 6, 1).matrix.rows == 6);
  CHECK_ERRC(rp_generate(5, 6, 1), Errc::invalid_argument);
  CHECK_ERRC(rp_generate(5, 0, 1), Errc::invalid_argument);

  // 10^5 entries: 20 x 5000
  const RandomProjection rp = rp_generate(5000, 20, 77);
  double mean = 0, var = 0;
  for (double v : rp.matrix.data) mean += v;
  mean /= rp.matrix.data.size();
  for (double v : rp.matrix.data) var += (v - mean) * (v - mean);
  var /= rp.matrix.data.size() - 1;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(var - 1.0 / 20) < 0.1 / 20);
}

TEST_CASE("projection is linear") {
  RandomProjection coord{3, 2, 0, Matrix(2, 3)};
  coord.matrix(0, 0) = 1;
  coord.matrix(1, 1) = 1;
  CHECK(rp_project(coord, std::vector<double>{3, 4, 5}) == std::vector<double>{3, 4});
  CHECK_ERRC(rp_project(coord, std::vector<double>{3, 4}), Errc::dimension_mismatch);

  const RandomProjection rp = rp_generate(315, 20, 4);
  CHECK(rp_project(rp, std::vector<double>(315, 0.0)) == std::vector<double>(20, 0.0));
  Rng rng(4);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> x(315), y(315), s(315);
    for (std::size_t i = 0; i < 315; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      s[i] = x[i] + y[i];
    }
    const auto fx = rp_project(rp, x), fy = rp_project(rp, y), fs = rp_project(rp, s);
    for (int i = 0; i < 20; ++i) CHECK(std::fabs(fs[i] - fx[i] - fy[i]) < 1e-12);
  }
  const auto j = rp.to_json();
  CHECK(j["seed"] == 4);
  CHECK(j["matrix"].size() == 20 * 315);
}

TEST_CASE("distortion audit") {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 12, 7);
  const auto same = distortion_audit(x, x, 0.1);
  CHECK(same.fraction_within == 1.0);
  CHECK(same.n_pairs == 66);
  CHECK(same.worst_ratio == 1.0);

  Matrix dup(2, 3, 1.5), dup_proj(2, 1, 0.0);
  CHECK(distortion_audit(dup, dup_proj, 0.5).fraction_within == 1.0);
  CHECK_ERRC(distortion_audit(x, Matrix(3, 2), 0.5), Errc::dimension_mismatch);

  // hand case: one pair, squared ratio 4
  Matrix a(2, 1), b(2, 1);
  a(1, 0) = 1;
  b(1, 0) = 2;
  const auto r = distortion_audit(a, b, 0.5);
  CHECK(r.fraction_within == 0.0);
  CHECK(r.worst_ratio == doctest::Approx(4.0));
  CHECK(r.mean_distortion == doctest::Approx(3.0));
}

TEST_CASE("JL audit at the certified dimension") {
  const int d = jl_min_dim(200, 0.5);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(1000 + seed);
    const Matrix x = random_matrix(rng, 200, 315);
    const auto rp = rp_generate(315, d, seed);
    CHECK(distortion_audit(x, rp.project(x), 0.5).fraction_within >= 0.99);
  }
}

TEST_CASE("distortion shrinks with more output dimensions") {
  Rng rng(6);
  const Matrix x = random_matrix(rng, 60, 315);
  double at20 = 0, at100 = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    at20 += distortion_audit(x, rp_generate(315, 20, seed).project(x), 0.5).mean_distortion;
    at100 += distortion_audit(x, rp_generate(315, 100, seed).project(x), 0.5).mean_distortion;
  }
  CHECK(at100 <= at20);
}

TEST_CASE("far pairs keep their order under projection") {
  // two tight clusters far apart plus a loose third one
  Rng rng(7);
  Matrix x(60, 315);
  for (std::size_t r = 0; r < 60; ++r)
    for (std::size_t c = 0; c < 315; ++c) x(r, c) = rng.normal() * (r < 20 ? 0.2 : r < 40 ? 1.0 : 3.0) + (r < 20 ? 5.0 : 0.0);
  const Matrix z = rp_generate(315, 20, 3).project(x);
  std::size_t agree = 0, total = 0;
  std::vector<double> dist, pdist;
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = i + 1; j < 60; ++j) {
      dist.push_back(pairwise_distance(x.row(i), x.row(j)));
      pdist.push_back(pairwise_distance(z.row(i), z.row(j)));
    }
  for (std::size_t a = 0; a < dist.size(); a += 3)
    for (std::size_t b = 0; b < dist.size(); b += 3) {
      if (dist[a] <= 3 * dist[b]) continue;
      ++total;
      agree += pdist[a] > pdist[b];
    }
  REQUIRE(total > 100);
  CHECK(double(agree) / total >= 0.95);
}

TEST_CASE("pca: rank-1 data and centering") {
  Matrix x(5, 3);
  for (int r = 0; r < 5; ++r) x(r, 0) = r - 7.0;
  const PcaModel m = pca_fit(x, 3);
  CHECK(m.components(0, 0) == doctest::Approx(1.0));
  CHECK(std::fabs(m.components(0, 1)) < 1e-12);
  CHECK(m.explained_variance[0] == doctest::Approx(2.5));
  CHECK(m.explained_variance[1] == doctest::Approx(0.0));
  CHECK(m.explained_variance[2] == doctest::Approx(0.0));
  for (double v : pca_transform(m, m.mean)) CHECK(std::fabs(v) < 1e-12);
  CHECK_ERRC(pca_fit(x, 4), Errc::invalid_argument);
  CHECK_ERRC(pca_fit(Matrix(1, 3), 1), Errc::invalid_argument);
  CHECK_ERRC(pca_transform(m, std::vector<double>{1, 2}), Errc::dimension_mismatch);
}

TEST_CASE("pca matches the Jacobi oracle on random 10x6 matrices") {
  Rng rng(8);
  for (int iter = 0; iter < 50; ++iter) {
    const Matrix x = random_matrix(rng, 10, 6, 1 + iter % 5);
    const auto ref = oracle::jacobi(covariance(x));
    for (int d = 1; d <= 6; ++d) {
      const PcaModel m = pca_fit(x, d);
      // orthonormal rows, sign convention, variances
      for (int i = 0; i < d; ++i) {
        double big = 0;
        for (int j = 0; j < d; ++j) {
          double dot = 0;
          for (int c = 0; c < 6; ++c) dot += m.components(i, c) * m.components(j, c);
          CHECK(std::fabs(dot - (i == j)) < 1e-9);
        }
        for (int c = 0; c < 6; ++c)
          if (std::fabs(m.components(i, c)) > std::fabs(big)) big = m.components(i, c);
        CHECK(big > 0);
        CHECK(near(m.explained_variance[i], ref.values[i], 1e-9));
        if (i > 0) CHECK(m.explained_variance[i] <= m.explained_variance[i - 1]);
      }
      std::vector<std::vector<double>> want(ref.vectors.begin(), ref.vectors.begin() + d);
      if (d < 6 && ref.values[d - 1] - ref.values[d] < 1e-6) continue;  // subspace not unique
      CHECK(oracle::max_principal_angle(rows_of(m.components), want) < 1e-8);
    }
  }
}

TEST_CASE("pca: full-rank reconstruction and determinism") {
  Rng rng(9);
  for (int iter = 0; iter < 20; ++iter) {
    const Matrix x = random_matrix(rng, 12, 5, 3);
    const PcaModel m = pca_fit(x, 5);
    for (std::size_t r = 0; r < x.rows; ++r) {
      const auto back = m.reconstruct(m.transform(x.row(r)));
      for (std::size_t c = 0; c < 5; ++c) CHECK(std::fabs(back[c] - x(r, c)) < 1e-9);
    }
    CHECK(pca_fit(x, 3).to_json().dump() == pca_fit(x, 3).to_json().dump());
  }
}
