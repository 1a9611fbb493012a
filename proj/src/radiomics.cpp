#include "pmcad/radiomics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pmcad/error.hpp"

namespace pmcad {

namespace {

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
};

void require_same_shape(const Image2D& image, const Mask2D& mask) {
  if (image.width != mask.width || image.height != mask.height) {
    throw Error(Errc::dimension_mismatch, "mask", "mask shape does not match image");
  }
}

BoundingBox mask_bbox(const Mask2D& mask) {
  BoundingBox b{mask.width, mask.height, -1, -1};
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.x1 < 0) throw Error(Errc::empty_input, "mask", "mask is empty");
  return b;
}

std::vector<double> masked_values(const Image2D& image, const Mask2D& mask) {
  require_same_shape(image, mask);
  std::vector<double> v;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (mask.data[i]) v.push_back(image.data[i]);
  }
  if (v.empty()) throw Error(Errc::empty_input, "mask", "mask is empty");
  return v;
}

void require_nonempty(const QuantizedRoi& q) {
  if (q.pixel_count == 0) throw Error(Errc::empty_input, "roi", "quantized ROI is empty");
}

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double sorted_median(const std::vector<double>& s) {
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

// Linear interpolation between closest ranks.
double sorted_percentile(const std::vector<double>& s, double pct) {
  const double h = (static_cast<double>(s.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= s.size()) return s.back();
  return s[lo] + (h - static_cast<double>(lo)) * (s[lo + 1] - s[lo]);
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

QuantizedRoi quantize(const Image2D& slice, const Mask2D& mask, int levels) {
  require_same_shape(slice, mask);
  if (levels < 1) throw Error(Errc::invalid_argument, "levels", "must be >= 1");
  const BoundingBox b = mask_bbox(mask);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      if (!mask.at(x, y)) continue;
      lo = std::min(lo, slice.at(x, y));
      hi = std::max(hi, slice.at(x, y));
    }
  }
  QuantizedRoi q;
  q.width = b.width();
  q.height = b.height();
  q.gray_levels = levels;
  q.levels.assign(static_cast<std::size_t>(q.width) * q.height, 0);
  const double range = hi - lo;
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      if (!mask.at(x, y)) continue;
      int level = 1;
      if (range > 0.0) {
        level = 1 + static_cast<int>(std::floor((slice.at(x, y) - lo) / range * levels));
        level = std::clamp(level, 1, levels);
      }
      q.levels[static_cast<std::size_t>(y - b.y0) * q.width + (x - b.x0)] = level;
      ++q.pixel_count;
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Run-length matrix

std::vector<std::vector<long>> glrlm_run_counts(const QuantizedRoi& q, Pixel d) {
  require_nonempty(q);
  const int max_run = std::max(q.width, q.height);
  std::vector<std::vector<long>> runs(static_cast<std::size_t>(q.gray_levels),
                                      std::vector<long>(static_cast<std::size_t>(max_run), 0));
  for (int y = 0; y < q.height; ++y) {
    for (int x = 0; x < q.width; ++x) {
      if (!q.inside(x, y)) continue;
      const int level = q.level(x, y);
      // Only run starts are counted.
      if (q.inside(x - d.x, y - d.y) && q.level(x - d.x, y - d.y) == level) continue;
      int length = 1;
      while (q.inside(x + length * d.x, y + length * d.y) && q.level(x + length * d.x, y + length * d.y) == level) {
        ++length;
      }
      ++runs[static_cast<std::size_t>(level - 1)][static_cast<std::size_t>(length - 1)];
    }
  }
  return runs;
}

std::array<double, 11> glrlm_statistics(const std::vector<std::vector<long>>& runs, std::size_t pixel_count) {
  double nr = 0.0;
  double sre = 0, lre = 0, lgre = 0, hgre = 0, srlge = 0, srhge = 0, lrlge = 0, lrhge = 0;
  std::vector<double> per_level(runs.size(), 0.0);
  std::vector<double> per_length(runs.empty() ? 0 : runs.front().size(), 0.0);
  for (std::size_t li = 0; li < runs.size(); ++li) {
    const double i2 = static_cast<double>((li + 1) * (li + 1));
    for (std::size_t ji = 0; ji < runs[li].size(); ++ji) {
      const double p = static_cast<double>(runs[li][ji]);
      if (p == 0.0) continue;
      const double j2 = static_cast<double>((ji + 1) * (ji + 1));
      nr += p;
      per_level[li] += p;
      per_length[ji] += p;
      sre += p / j2;
      lre += p * j2;
      lgre += p / i2;
      hgre += p * i2;
      srlge += p / (i2 * j2);
      srhge += p * i2 / j2;
      lrlge += p * j2 / i2;
      lrhge += p * i2 * j2;
    }
  }
  double gln = 0.0, rln = 0.0;
  for (double v : per_level) gln += v * v;
  for (double v : per_length) rln += v * v;
  return {sre / nr,  lre / nr,   gln / nr,   rln / nr,   nr / static_cast<double>(pixel_count), lgre / nr,
          hgre / nr, srlge / nr, srhge / nr, lrlge / nr, lrhge / nr};
}

std::array<double, 44> glrlm_features(const QuantizedRoi& q) {
  std::array<double, 44> out{};
  for (std::size_t d = 0; d < kRunDirections.size(); ++d) {
    const auto stats = glrlm_statistics(glrlm_run_counts(q, kRunDirections[d]), q.pixel_count);
    std::copy(stats.begin(), stats.end(), out.begin() + static_cast<std::ptrdiff_t>(d * 11));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gray-level difference method

std::vector<long> gldm_difference_counts(const QuantizedRoi& q, int drow, int dcol) {
  require_nonempty(q);
  std::vector<long> counts(static_cast<std::size_t>(q.gray_levels), 0);
  for (int y = 0; y < q.height; ++y) {
    for (int x = 0; x < q.width; ++x) {
      if (!q.inside(x, y) || !q.inside(x + dcol, y + drow)) continue;
      ++counts[static_cast<std::size_t>(std::abs(q.level(x, y) - q.level(x + dcol, y + drow)))];
    }
  }
  return counts;
}

std::array<double, 4> gldm_statistics(std::span<const long> counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), 0L));
  if (total == 0.0) return {0.0, 0.0, 0.0, 0.0};
  double mean = 0.0;
  for (std::size_t d = 0; d < counts.size(); ++d) mean += static_cast<double>(d) * static_cast<double>(counts[d]) / total;
  double var = 0.0;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    const double dev = static_cast<double>(d) - mean;
    var += dev * dev * static_cast<double>(counts[d]) / total;
  }
  // Median of the difference distribution: smallest d with CDF >= 1/2.
  double median = 0.0;
  long cumulative = 0;
  for (std::size_t d = 0; d < counts.size(); ++d) {
    cumulative += counts[d];
    if (2.0 * static_cast<double>(cumulative) >= total) {
      median = static_cast<double>(d);
      break;
    }
  }
  return {mean, median, std::sqrt(var), var};
}

std::array<double, 16> gldm_features(const QuantizedRoi& q) {
  std::array<double, 16> out{};
  for (std::size_t k = 0; k < kGldmDisplacements.size(); ++k) {
    const auto [dr, dc] = kGldmDisplacements[k];
    const auto stats = gldm_statistics(gldm_difference_counts(q, dr, dc));
    std::copy(stats.begin(), stats.end(), out.begin() + static_cast<std::ptrdiff_t>(k * 4));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Co-occurrence matrix

std::vector<long> glcm_pair_counts(const QuantizedRoi& q, int drow, int dcol) {
  require_nonempty(q);
  const auto g = static_cast<std::size_t>(q.gray_levels);
  std::vector<long> counts(g * g, 0);
  for (int y = 0; y < q.height; ++y) {
    for (int x = 0; x < q.width; ++x) {
      if (!q.inside(x, y) || !q.inside(x + dcol, y + drow)) continue;
      const auto i = static_cast<std::size_t>(q.level(x, y) - 1);
      const auto j = static_cast<std::size_t>(q.level(x + dcol, y + drow) - 1);
      ++counts[i * g + j];
      ++counts[j * g + i];
    }
  }
  return counts;
}

std::vector<double> glcm_matrix(const QuantizedRoi& q, int distance) {
  if (distance < 1) throw Error(Errc::invalid_argument, "distance", "must be >= 1");
  const auto g = static_cast<std::size_t>(q.gray_levels);
  const std::array<std::array<int, 2>, 4> offsets{{{0, distance}, {-distance, distance}, {-distance, 0}, {-distance, -distance}}};
  std::vector<double> avg(g * g, 0.0);
  int used = 0;
  for (const auto& [dr, dc] : offsets) {
    const auto counts = glcm_pair_counts(q, dr, dc);
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), 0L));
    if (total == 0.0) continue;
    for (std::size_t k = 0; k < counts.size(); ++k) avg[k] += static_cast<double>(counts[k]) / total;
    ++used;
  }
  if (used == 0) return {};
  for (double& v : avg) v /= used;
  return avg;
}

std::array<double, 13> haralick_statistics(std::span<const double> p, int gray_levels) {
  const auto g = static_cast<std::size_t>(gray_levels);
  std::vector<double> px(g, 0.0), p_sum(2 * g + 1, 0.0), p_diff(g, 0.0);
  double energy = 0, contrast = 0, idm = 0, entropy = 0, sum_ij = 0;
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      const double v = p[a * g + b];
      if (v == 0.0) continue;
      const double i = static_cast<double>(a + 1), j = static_cast<double>(b + 1);
      px[a] += v;
      p_sum[a + b + 2] += v;
      p_diff[a > b ? a - b : b - a] += v;
      energy += v * v;
      contrast += (i - j) * (i - j) * v;
      idm += v / (1.0 + (i - j) * (i - j));
      entropy -= plogp(v);
      sum_ij += i * j * v;
    }
  }
  double mu = 0.0;
  for (std::size_t a = 0; a < g; ++a) mu += static_cast<double>(a + 1) * px[a];
  double sigma2 = 0.0;
  for (std::size_t a = 0; a < g; ++a) sigma2 += (static_cast<double>(a + 1) - mu) * (static_cast<double>(a + 1) - mu) * px[a];
  const double correlation = sigma2 > 1e-15 ? (sum_ij - mu * mu) / sigma2 : 1.0;

  double sum_avg = 0.0, sum_entropy = 0.0;
  for (std::size_t k = 2; k <= 2 * g; ++k) {
    sum_avg += static_cast<double>(k) * p_sum[k];
    sum_entropy -= plogp(p_sum[k]);
  }
  double sum_var = 0.0;
  for (std::size_t k = 2; k <= 2 * g; ++k) sum_var += (static_cast<double>(k) - sum_avg) * (static_cast<double>(k) - sum_avg) * p_sum[k];

  double diff_avg = 0.0, diff_entropy = 0.0;
  for (std::size_t k = 0; k < g; ++k) {
    diff_avg += static_cast<double>(k) * p_diff[k];
    diff_entropy -= plogp(p_diff[k]);
  }
  double diff_var = 0.0;
  for (std::size_t k = 0; k < g; ++k) diff_var += (static_cast<double>(k) - diff_avg) * (static_cast<double>(k) - diff_avg) * p_diff[k];

  double hx = 0.0;
  for (double v : px) hx -= plogp(v);
  double hxy1 = 0.0, hxy2 = 0.0;
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      const double pp = px[a] * px[b];
      if (pp <= 0.0) continue;
      const double v = p[a * g + b];
      if (v > 0.0) hxy1 -= v * std::log2(pp);
      hxy2 -= pp * std::log2(pp);
    }
  }
  const double imc1 = hx > 0.0 ? (entropy - hxy1) / hx : 0.0;
  const double imc2 = std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));

  return {energy,   contrast,    correlation, sigma2,   idm,  sum_avg, sum_var,
          sum_entropy, entropy, diff_var,    diff_entropy, imc1, imc2};
}

std::array<double, 13> glcm_features(const QuantizedRoi& q, int distance) {
  require_nonempty(q);
  const auto p = glcm_matrix(q, distance);
  if (p.empty()) return {};
  return haralick_statistics(p, q.gray_levels);
}

// ---------------------------------------------------------------------------
// Haar subbands

std::array<Subband, 4> wavelet_subbands(const Image2D& slice, const Mask2D& mask) {
  require_same_shape(slice, mask);
  const BoundingBox b = mask_bbox(mask);
  if (b.width() < 2 || b.height() < 2) {
    throw Error(Errc::invalid_argument, "roi", "ROI bounding box smaller than 2x2");
  }
  const int pw = b.width() + b.width() % 2, ph = b.height() + b.height() % 2;
  // Symmetric extension: an odd trailing edge repeats its last sample.
  auto value = [&](int x, int y) { return slice.at(b.x0 + std::min(x, b.width() - 1), b.y0 + std::min(y, b.height() - 1)); };
  auto inside = [&](int x, int y) { return mask.at(b.x0 + std::min(x, b.width() - 1), b.y0 + std::min(y, b.height() - 1)) != 0; };

  const int hw = pw / 2, hh = ph / 2;
  std::array<Subband, 4> out{{{"LL", Image2D(hw, hh), Mask2D(hw, hh)},
                              {"LH", Image2D(hw, hh), Mask2D(hw, hh)},
                              {"HL", Image2D(hw, hh), Mask2D(hw, hh)},
                              {"HH", Image2D(hw, hh), Mask2D(hw, hh)}}};
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double a = value(2 * x, 2 * y), bb = value(2 * x + 1, 2 * y);
      const double c = value(2 * x, 2 * y + 1), d = value(2 * x + 1, 2 * y + 1);
      out[0].image.at(x, y) = (a + bb + c + d) / 2.0;
      out[1].image.at(x, y) = (a + bb - c - d) / 2.0;
      out[2].image.at(x, y) = (a - bb + c - d) / 2.0;
      out[3].image.at(x, y) = (a - bb - c + d) / 2.0;
      const int covered = inside(2 * x, 2 * y) + inside(2 * x + 1, 2 * y) + inside(2 * x, 2 * y + 1) +
                          inside(2 * x + 1, 2 * y + 1);
      const std::uint8_t m = covered >= 2 ? 1 : 0;
      for (auto& s : out) s.mask.at(x, y) = m;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// First-order density statistics

std::array<double, 21> density_features(const Image2D& image, const Mask2D& mask) {
  std::vector<double> v = masked_values(image, mask);
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double sum = 0.0, sum_sq = 0.0;
  for (double x : v) {
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const double var = m2, sd = std::sqrt(m2);
  const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  const double kurt = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  const double lo = v.front(), hi = v.back(), range = hi - lo;

  std::array<double, 32> hist{};
  for (double x : v) {
    int bin = 0;
    if (range > 0.0) bin = std::min(31, static_cast<int>(std::floor((x - lo) / range * 32.0)));
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  double entropy = 0.0, uniformity = 0.0;
  for (double c : hist) {
    const double p = c / n;
    entropy -= plogp(p);
    uniformity += p * p;
  }

  const double median = sorted_median(v);
  const double p10 = sorted_percentile(v, 10), p25 = sorted_percentile(v, 25);
  const double p75 = sorted_percentile(v, 75), p90 = sorted_percentile(v, 90);
  std::vector<double> abs_dev(v.size());
  std::transform(v.begin(), v.end(), abs_dev.begin(), [median](double x) { return std::abs(x - median); });
  std::sort(abs_dev.begin(), abs_dev.end());
  const double mad = sorted_median(abs_dev);
  const double rms = std::sqrt(sum_sq / n);
  const double cv = mean != 0.0 ? sd / mean : 0.0;
  const std::size_t trim = static_cast<std::size_t>(std::floor(0.1 * n));
  double trimmed = 0.0;
  for (std::size_t i = trim; i < v.size() - trim; ++i) trimmed += v[i];
  trimmed /= static_cast<double>(v.size() - 2 * trim);

  return {mean, median, sd,  var,       skew, kurt,      sum_sq, entropy, lo, hi,      range,
          p10,  p25,    p75, p90, p75 - p25, mad,  rms, uniformity, cv, trimmed};
}

// ---------------------------------------------------------------------------
// Laplacian of Gaussian

Image2D laplacian_of_gaussian(const Image2D& image, double sigma) {
  if (!(sigma > 0)) throw Error(Errc::invalid_argument, "sigma", "must be > 0");
  if (image.empty()) throw Error(Errc::empty_input, "image", "image is empty");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double ksum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    ksum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= ksum;

  const int w = image.width, h = image.height;
  Image2D tmp(w, h), smooth(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<std::size_t>(i + radius)] * image.at(reflect_index(x + i, w), y);
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.at(x, reflect_index(y + i, h));
      smooth.at(x, y) = acc;
    }
  }
  Image2D out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = smooth.at(reflect_index(x + 1, w), y) + smooth.at(reflect_index(x - 1, w), y) +
                     smooth.at(x, reflect_index(y + 1, h)) + smooth.at(x, reflect_index(y - 1, h)) - 4.0 * smooth.at(x, y);
    }
  }
  return out;
}

std::array<double, 3> log_features(const Image2D& slice, const Mask2D& mask, double sigma) {
  require_same_shape(slice, mask);
  const BoundingBox b = mask_bbox(mask);
  // The response inside the box depends only on pixels within radius + 1.
  const int margin = static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  const int x0 = std::max(0, b.x0 - margin), y0 = std::max(0, b.y0 - margin);
  const int x1 = std::min(slice.width - 1, b.x1 + margin), y1 = std::min(slice.height - 1, b.y1 + margin);
  Image2D crop(x1 - x0 + 1, y1 - y0 + 1);
  Mask2D crop_mask(crop.width, crop.height);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      crop.at(x - x0, y - y0) = slice.at(x, y);
      crop_mask.at(x - x0, y - y0) = mask.at(x, y);
    }
  }
  std::vector<double> v = masked_values(laplacian_of_gaussian(crop, sigma), crop_mask);
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  std::sort(v.begin(), v.end());
  return {mean, sorted_median(v), std::sqrt(var / n)};
}

// ---------------------------------------------------------------------------
// Manifest and composition

const char* feature_group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::glrlm: return "glrlm";
    case FeatureGroup::gldm: return "gldm";
    case FeatureGroup::wavelet_glcm: return "wavelet_glcm";
    case FeatureGroup::wavelet_density: return "wavelet_density";
    case FeatureGroup::wavelet_gldm: return "wavelet_gldm";
    case FeatureGroup::log: return "log";
  }
  return "unknown";
}

namespace {

constexpr std::array<const char*, 11> kGlrlmNames{"sre", "lre", "gln", "rln", "rp", "lgre",
                                                  "hgre", "srlge", "srhge", "lrlge", "lrhge"};
constexpr std::array<const char*, 4> kRunDirectionNames{"d000", "d045", "d090", "d135"};
constexpr std::array<const char*, 4> kGldmStatNames{"mean", "median", "std", "var"};
constexpr std::array<const char*, 4> kGldmDisplacementNames{"0_1", "1_0", "1_1", "1_m1"};
constexpr std::array<const char*, 13> kGlcmNames{
    "energy",      "contrast", "correlation",  "sum_squares_variance", "idm", "sum_average", "sum_variance",
    "sum_entropy", "entropy",  "difference_variance", "difference_entropy", "imc1", "imc2"};
constexpr std::array<const char*, 21> kDensityNames{
    "mean", "median", "std",  "var",  "skewness", "kurtosis", "energy",     "entropy", "min", "max",          "range",
    "p10",  "p25",    "p75",  "p90",  "iqr",      "mad",      "rms",        "uniformity", "cv", "trimmed_mean"};
constexpr std::array<const char*, 4> kSubbandNames{"LL", "LH", "HL", "HH"};

FeatureManifest build_manifest() {
  FeatureManifest m;
  auto add = [&m](std::string name, FeatureGroup g) {
    m.names.push_back(std::move(name));
    m.groups.push_back(g);
  };
  for (const char* dir : kRunDirectionNames) {
    for (const char* stat : kGlrlmNames) add(std::string("glrlm_") + dir + "_" + stat, FeatureGroup::glrlm);
  }
  for (const char* disp : kGldmDisplacementNames) {
    for (const char* stat : kGldmStatNames) add(std::string("gldm_") + disp + "_" + stat, FeatureGroup::gldm);
  }
  for (const char* band : kSubbandNames) {
    const std::string prefix = std::string("wavelet_") + band + "_";
    for (int dist : {1, 2}) {
      for (const char* stat : kGlcmNames) {
        add(prefix + "glcm" + std::to_string(dist) + "_" + stat, FeatureGroup::wavelet_glcm);
      }
    }
    for (const char* stat : kDensityNames) add(prefix + "density_" + stat, FeatureGroup::wavelet_density);
    for (const char* disp : kGldmDisplacementNames) {
      for (const char* stat : kGldmStatNames) {
        add(prefix + "gldm_" + disp + "_" + stat, FeatureGroup::wavelet_gldm);
      }
    }
  }
  for (const char* stat : {"mean", "median", "std"}) add(std::string("log_") + stat, FeatureGroup::log);
  return m;
}

}  // namespace

const FeatureManifest& feature_manifest() {
  static const FeatureManifest manifest = build_manifest();
  return manifest;
}

std::string manifest_text() {
  std::ostringstream out;
  const auto& m = feature_manifest();
  for (std::size_t i = 0; i < m.names.size(); ++i) out << m.names[i] << '\t' << feature_group_name(m.groups[i]) << '\n';
  return out.str();
}

FeatureVector extract_slice_features(const Image2D& slice, const Mask2D& mask, std::vector<std::string>* provenance) {
  require_same_shape(slice, mask);
  FeatureVector fv;
  fv.values.reserve(kFeatureCount);
  auto append = [&fv](const auto& arr) { fv.values.insert(fv.values.end(), arr.begin(), arr.end()); };

  const QuantizedRoi q = quantize(slice, mask);
  append(glrlm_features(q));
  append(gldm_features(q));

  const BoundingBox b = mask_bbox(mask);
  if (b.width() < 2 || b.height() < 2) {
    fv.values.insert(fv.values.end(), 4 * (13 + 13 + 21 + 16), 0.0);
    if (provenance) provenance->push_back("wavelet: ROI bounding box smaller than 2x2, all subband features zero");
  } else {
    for (const Subband& band : wavelet_subbands(slice, mask)) {
      if (mask_area(band.mask) == 0) {
        fv.values.insert(fv.values.end(), 13 + 13 + 21 + 16, 0.0);
        if (provenance) provenance->push_back("wavelet " + band.name + ": downsampled mask empty, features zero");
        continue;
      }
      const QuantizedRoi qb = quantize(band.image, band.mask);
      append(glcm_features(qb, 1));
      append(glcm_features(qb, 2));
      append(density_features(band.image, band.mask));
      append(gldm_features(qb));
    }
  }
  append(log_features(slice, mask));
  return fv;
}

std::vector<double> aggregation_weights(std::span<const SliceFeatures> per_slice, const Spacing& spacing_mm) {
  if (per_slice.empty()) throw Error(Errc::empty_input, "per_slice", "no slices to aggregate");
  std::vector<double> w(per_slice.size());
  double total = 0.0;
  for (std::size_t i = 0; i < per_slice.size(); ++i) {
    if (per_slice[i].area_px == 0) throw Error(Errc::invalid_argument, "area_px", "slice area must be > 0");
    const double thickness = per_slice[i].thickness_mm > 0.0 ? per_slice[i].thickness_mm : spacing_mm.sz;
    w[i] = static_cast<double>(per_slice[i].area_px) * spacing_mm.sx * spacing_mm.sy * thickness;
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

FeatureVector aggregate_volume_features(std::span<const SliceFeatures> per_slice, const Spacing& spacing_mm) {
  const std::vector<double> w = aggregation_weights(per_slice, spacing_mm);
  const std::size_t k = per_slice.front().values.size();
  FeatureVector out;
  out.values.assign(k, 0.0);
  for (std::size_t i = 0; i < per_slice.size(); ++i) {
    if (per_slice[i].values.size() != k) throw Error(Errc::dimension_mismatch, "values", "slice vectors differ in length");
    for (std::size_t f = 0; f < k; ++f) out.values[f] += w[i] * per_slice[i].values[f];
  }
  return out;
}

Normalizer fit_normalizer(const Matrix& train) {
  if (train.rows == 0 || train.cols == 0) throw Error(Errc::empty_input, "train", "empty training matrix");
  Normalizer n;
  n.min.assign(train.cols, std::numeric_limits<double>::infinity());
  n.max.assign(train.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t r = 0; r < train.rows; ++r) {
    for (std::size_t c = 0; c < train.cols; ++c) {
      n.min[c] = std::min(n.min[c], train(r, c));
      n.max[c] = std::max(n.max[c], train(r, c));
    }
  }
  return n;
}

std::vector<double> Normalizer::apply(std::span<const double> values) const {
  if (values.size() != min.size()) throw Error(Errc::dimension_mismatch, "values", "vector length differs from normalizer");
  std::vector<double> out(values.size());
  for (std::size_t c = 0; c < values.size(); ++c) {
    const double range = max[c] - min[c];
    out[c] = range > 0.0 ? std::clamp((values[c] - min[c]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

Matrix Normalizer::apply(const Matrix& m) const {
  Matrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto v = apply(m.row(r));
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

nlohmann::json Normalizer::to_json() const { return {{"min", min}, {"max", max}}; }

}  // namespace pmcad
