#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcad/grid.hpp"
#include "pmcad/matrix.hpp"
#include "pmcad/volume_io.hpp"

namespace pmcad {

inline constexpr int kGrayLevels = 32;
inline constexpr std::size_t kFeatureCount = 315;

// Integer gray levels over the mask's bounding box. Level 0 marks pixels
// outside the mask; in-mask pixels carry levels in [1, gray_levels].
struct QuantizedRoi {
  int width = 0;
  int height = 0;
  int gray_levels = kGrayLevels;
  std::size_t pixel_count = 0;
  std::vector<int> levels;

  bool inside(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height && levels[static_cast<std::size_t>(y) * width + x] > 0;
  }
  int level(int x, int y) const { return levels[static_cast<std::size_t>(y) * width + x]; }
};

QuantizedRoi quantize(const Image2D& slice, const Mask2D& mask, int levels = kGrayLevels);

// Run directions as (dx, dy) steps: 0, 45, 90 and 135 degrees.
inline constexpr std::array<Pixel, 4> kRunDirections{{{1, 0}, {1, -1}, {0, 1}, {1, 1}}};
// GLDM displacements as (drow, dcol).
inline constexpr std::array<std::array<int, 2>, 4> kGldmDisplacements{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};

// Run counts indexed [level - 1][run_length - 1]; run lengths up to
// max(width, height).
std::vector<std::vector<long>> glrlm_run_counts(const QuantizedRoi& q, Pixel direction);
std::array<double, 11> glrlm_statistics(const std::vector<std::vector<long>>& runs, std::size_t pixel_count);
std::array<double, 44> glrlm_features(const QuantizedRoi& q);

// Histogram of |level(p) - level(p + delta)| over in-mask pairs, size gray_levels.
std::vector<long> gldm_difference_counts(const QuantizedRoi& q, int drow, int dcol);
std::array<double, 4> gldm_statistics(std::span<const long> counts);
std::array<double, 16> gldm_features(const QuantizedRoi& q);

// Symmetric co-occurrence counts for one displacement, gray_levels^2 row-major.
std::vector<long> glcm_pair_counts(const QuantizedRoi& q, int drow, int dcol);
// Normalized matrix averaged over the four directions at `distance`; empty
// when no direction has a valid pair.
std::vector<double> glcm_matrix(const QuantizedRoi& q, int distance);
std::array<double, 13> haralick_statistics(std::span<const double> p, int gray_levels);
std::array<double, 13> glcm_features(const QuantizedRoi& q, int distance);

struct Subband {
  std::string name;
  Image2D image;
  Mask2D mask;
};

// One-level orthonormal Haar transform of the mask's bounding box: LL, LH, HL, HH.
std::array<Subband, 4> wavelet_subbands(const Image2D& slice, const Mask2D& mask);

std::array<double, 21> density_features(const Image2D& image, const Mask2D& mask);

// Gaussian (radius ceil(3 sigma)) then 4-neighbour Laplacian, reflected borders.
Image2D laplacian_of_gaussian(const Image2D& image, double sigma);
std::array<double, 3> log_features(const Image2D& slice, const Mask2D& mask, double sigma = 2.0);

enum class FeatureGroup { glrlm, gldm, wavelet_glcm, wavelet_density, wavelet_gldm, log };
const char* feature_group_name(FeatureGroup g);

struct FeatureManifest {
  std::vector<std::string> names;
  std::vector<FeatureGroup> groups;
};

const FeatureManifest& feature_manifest();
std::string manifest_text();

struct FeatureVector {
  std::string case_id;
  std::vector<double> values;
};

FeatureVector extract_slice_features(const Image2D& slice, const Mask2D& mask,
                                     std::vector<std::string>* provenance = nullptr);

struct SliceFeatures {
  std::vector<double> values;
  std::size_t area_px = 0;
  // Zero means "use the volume's slice spacing".
  double thickness_mm = 0.0;
};

FeatureVector aggregate_volume_features(std::span<const SliceFeatures> per_slice, const Spacing& spacing_mm);
std::vector<double> aggregation_weights(std::span<const SliceFeatures> per_slice, const Spacing& spacing_mm);

struct Normalizer {
  std::vector<double> min;
  std::vector<double> max;

  std::vector<double> apply(std::span<const double> values) const;
  Matrix apply(const Matrix& m) const;
  nlohmann::json to_json() const;
};

Normalizer fit_normalizer(const Matrix& train);

}  // namespace pmcad
