#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pmcad {

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

// Row-major 2D grid, x fastest.
template <typename T>
struct Grid2D {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid2D() = default;
  Grid2D(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  T& at(int x, int y) { return data[index(x, y)]; }
  const T& at(int x, int y) const { return data[index(x, y)]; }
  T& operator[](Pixel p) { return at(p.x, p.y); }
  const T& operator[](Pixel p) const { return at(p.x, p.y); }

  bool operator==(const Grid2D&) const = default;
};

using Image2D = Grid2D<double>;
using Mask2D = Grid2D<std::uint8_t>;

std::size_t mask_area(const Mask2D& mask);
double dice(const Mask2D& a, const Mask2D& b);

// Euclidean disk dilation: a pixel is set when it lies within `radius` of any
// set pixel.
Mask2D dilate(const Mask2D& mask, int radius);
Mask2D mask_union(const Mask2D& a, const Mask2D& b);
Mask2D mask_intersection(const Mask2D& a, const Mask2D& b);
bool is_subset(const Mask2D& inner, const Mask2D& outer);

}  // namespace pmcad
