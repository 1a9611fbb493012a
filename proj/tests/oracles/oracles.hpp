#pragma once

// Independent reference implementations used only by tests. None of this
// code calls into the library's algorithms; inputs are plain containers.

#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

namespace oracle {

// levels[y][x], 0 = outside the ROI.
using LevelMap = std::vector<std::vector<int>>;
using Image = std::vector<std::vector<double>>;
using MaskRows = std::vector<std::vector<int>>;

// Run enumeration by walking every full line of the box in direction (dx, dy).
// Result maps (level, length) -> count.
std::map<std::pair<int, int>, long> runs(const LevelMap& q, int dx, int dy);
std::array<double, 11> run_stats(const std::map<std::pair<int, int>, long>& r, long pixels);

// |difference| -> count, over ordered pairs p, p + (drow, dcol).
std::map<int, long> differences(const LevelMap& q, int drow, int dcol);
std::array<double, 4> difference_stats(const std::map<int, long>& d);

// Symmetric pair counts, keyed (i, j) with both orders added.
std::map<std::pair<int, int>, long> cooccurrence(const LevelMap& q, int drow, int dcol);
// Averaged normalized matrix over the four directions; empty map if no pairs.
std::map<std::pair<int, int>, double> averaged_glcm(const LevelMap& q, int distance);
std::array<double, 13> haralick(const std::map<std::pair<int, int>, double>& p, int gray_levels);

// Min-max binning into `levels`, over the mask's bounding box.
LevelMap quantize(const Image& img, const MaskRows& mask, int levels = 32);

struct Band {
  Image image;
  MaskRows mask;
};
std::array<Band, 4> haar(const Image& img, const MaskRows& mask);

std::array<double, 21> density(const Image& img, const MaskRows& mask);

// Direct 2D Gaussian convolution followed by the 5-point Laplacian on the
// whole image (reflected borders).
Image log_response(const Image& img, double sigma);
std::array<double, 3> log_stats(const Image& img, const MaskRows& mask, double sigma);

// The full 315-value slice vector assembled from the pieces above.
std::vector<double> slice_features(const Image& img, const MaskRows& mask);

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenvalues
// descending; vectors[k] is the k-th eigenvector.
struct Eigen {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};
Eigen jacobi(std::vector<std::vector<double>> a);

// Largest principal angle (radians) between the row spaces of two sets of
// orthonormal rows.
double max_principal_angle(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

// Mann-Whitney U / (n+ n-), ties count one half.
double mann_whitney(const std::vector<double>& scores, const std::vector<int>& labels);
// ROC by sweeping every candidate threshold (distinct scores plus +inf).
std::vector<std::pair<double, double>> sweep_roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Breadth-first 8-connected fill of {v <= t} from (sx, sy).
MaskRows flood(const Image& img, int sx, int sy, double t);

// Exterior 8-neighbour ring mean minus interior mean.
double ring_contrast(const Image& img, const MaskRows& mask);

}  // namespace oracle
