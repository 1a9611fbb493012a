#include "pmcad/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pmcad/error.hpp"

namespace pmcad {

namespace {

void require_same_shape(const Mask2D& a, const Mask2D& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(Errc::dimension_mismatch, "mask", "mask shapes differ");
  }
}

}  // namespace

std::size_t mask_area(const Mask2D& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

double dice(const Mask2D& a, const Mask2D& b) {
  require_same_shape(a, b);
  std::size_t both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a.data[i] != 0;
    nb += b.data[i] != 0;
    both += (a.data[i] != 0) && (b.data[i] != 0);
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

Mask2D dilate(const Mask2D& mask, int radius) {
  if (radius < 0) throw Error(Errc::invalid_argument, "radius", "negative dilation radius");
  if (radius == 0) return mask;
  std::vector<Pixel> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.push_back({dx, dy});
    }
  }
  Mask2D out(mask.width, mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      // Interior pixels whose 4-neighbours are all set add nothing new.
      if (x > 0 && y > 0 && x + 1 < mask.width && y + 1 < mask.height && mask.at(x - 1, y) &&
          mask.at(x + 1, y) && mask.at(x, y - 1) && mask.at(x, y + 1)) {
        out.at(x, y) = 1;
        continue;
      }
      for (const Pixel& o : offsets) {
        const int nx = x + o.x, ny = y + o.y;
        if (mask.contains(nx, ny)) out.at(nx, ny) = 1;
      }
    }
  }
  return out;
}

Mask2D mask_union(const Mask2D& a, const Mask2D& b) {
  require_same_shape(a, b);
  Mask2D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] || b.data[i]) ? 1 : 0;
  return out;
}

Mask2D mask_intersection(const Mask2D& a, const Mask2D& b) {
  require_same_shape(a, b);
  Mask2D out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
  return out;
}

bool is_subset(const Mask2D& inner, const Mask2D& outer) {
  require_same_shape(inner, outer);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    if (inner.data[i] && !outer.data[i]) return false;
  }
  return true;
}

}  // namespace pmcad
