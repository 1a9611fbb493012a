#pragma once

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "oracles/oracles.hpp"
#include "pmcad/error.hpp"
#include "pmcad/grid.hpp"
#include "pmcad/radiomics.hpp"
#include "pmcad/rng.hpp"

// Asserts that `expr` throws pmcad::Error with the given code.
#define CHECK_ERRC(expr, errc)                                 \
  do {                                                         \
    bool thrown_ = false;                                      \
    try {                                                      \
      (void)(expr);                                            \
    } catch (const pmcad::Error& e_) {                         \
      thrown_ = true;                                          \
      CHECK_MESSAGE(e_.code() == (errc), pmcad::errc_name(e_.code())); \
    }                                                          \
    CHECK_MESSAGE(thrown_, "expected pmcad::Error from " #expr); \
  } while (0)

namespace testing {

inline oracle::Image to_rows(const pmcad::Image2D& img) {
  oracle::Image out(img.height, std::vector<double>(img.width));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out[y][x] = img.at(x, y);
  return out;
}

inline oracle::MaskRows to_rows(const pmcad::Mask2D& m) {
  oracle::MaskRows out(m.height, std::vector<int>(m.width));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) out[y][x] = m.at(x, y);
  return out;
}

inline oracle::LevelMap to_rows(const pmcad::QuantizedRoi& q) {
  oracle::LevelMap out(q.height, std::vector<int>(q.width));
  for (int y = 0; y < q.height; ++y)
    for (int x = 0; x < q.width; ++x) out[y][x] = q.level(x, y);
  return out;
}

// |a - b| <= tol * max(1, |a|, |b|)
inline bool near(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

struct RandomRoi {
  pmcad::Image2D image;
  pmcad::Mask2D mask;
};

// Random image up to 8x8 inside a padded canvas, with a random nonempty
// mask. Values are integers so quantization edges are reproducible.
inline RandomRoi random_roi(pmcad::Rng& rng, int max_side = 8, int pad = 3) {
  const int w = rng.uniform_int(1, max_side), h = rng.uniform_int(1, max_side);
  const int levels_hint = rng.uniform_int(1, 40);
  RandomRoi r{pmcad::Image2D(w + 2 * pad, h + 2 * pad, 500.0), pmcad::Mask2D(w + 2 * pad, h + 2 * pad, 0)};
  const double fill = 0.35 + 0.65 * rng.uniform01();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      r.image.at(x + pad, y + pad) = rng.uniform_int(-levels_hint, levels_hint) * 7.0;
      r.mask.at(x + pad, y + pad) = rng.uniform01() < fill ? 1 : 0;
    }
  if (pmcad::mask_area(r.mask) == 0) r.mask.at(pad + rng.uniform_int(0, w - 1), pad + rng.uniform_int(0, h - 1)) = 1;
  return r;
}

// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pmcad_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
