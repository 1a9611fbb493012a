#include "pmcad/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

#include "pmcad/error.hpp"
#include "pmcad/rng.hpp"

namespace pmcad {

namespace {

void require_odd_window(int window) {
  if (window < 3 || window % 2 == 0) {
    throw Error(Errc::invalid_argument, "window", "window must be odd and >= 3");
  }
}

void require_seed_in(const Image2D& slice, const Seed& seed) {
  if (!slice.contains(seed.x, seed.y)) throw Error(Errc::out_of_range, "seed", "seed outside slice");
}

void require_nonempty(const Mask2D& mask, const char* field) {
  if (mask_area(mask) == 0) throw Error(Errc::empty_input, field, "mask is empty");
}

// Exterior 8-adjacent ring of a mask.
Mask2D outer_ring(const Mask2D& mask) {
  Mask2D ring(mask.width, mask.height, 0);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) continue;
      bool touches = false;
      for (int dy = -1; dy <= 1 && !touches; ++dy) {
        for (int dx = -1; dx <= 1 && !touches; ++dx) {
          const int nx = x + dx, ny = y + dy;
          touches = mask.contains(nx, ny) && mask.at(nx, ny);
        }
      }
      ring.at(x, y) = touches ? 1 : 0;
    }
  }
  return ring;
}

}  // namespace

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::ratio_exceeded: return "ratio_exceeded";
    case StopReason::no_growth: return "no_growth";
    case StopReason::max_layers: return "max_layers";
  }
  return "unknown";
}

Image2D wiener_filter(const Image2D& slice, int window) {
  require_odd_window(window);
  if (slice.empty()) throw Error(Errc::empty_input, "slice", "image is empty");
  const int w = slice.width, h = slice.height, half = window / 2;

  // Summed-area tables of x and x^2 with a zero guard row/column.
  std::vector<double> s1(static_cast<std::size_t>(w + 1) * (h + 1), 0.0), s2(s1.size(), 0.0);
  auto sat = [w](int x, int y) { return static_cast<std::size_t>(y) * (w + 1) + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = slice.at(x, y);
      s1[sat(x + 1, y + 1)] = v + s1[sat(x, y + 1)] + s1[sat(x + 1, y)] - s1[sat(x, y)];
      s2[sat(x + 1, y + 1)] = v * v + s2[sat(x, y + 1)] + s2[sat(x + 1, y)] - s2[sat(x, y)];
    }
  }

  Image2D mean(w, h), var(w, h);
  double var_sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - half), x1 = std::min(w - 1, x + half);
      const int y0 = std::max(0, y - half), y1 = std::min(h - 1, y + half);
      const double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
      const double a = s1[sat(x1 + 1, y1 + 1)] - s1[sat(x0, y1 + 1)] - s1[sat(x1 + 1, y0)] + s1[sat(x0, y0)];
      const double b = s2[sat(x1 + 1, y1 + 1)] - s2[sat(x0, y1 + 1)] - s2[sat(x1 + 1, y0)] + s2[sat(x0, y0)];
      const double mu = a / n;
      const double sigma2 = std::max(0.0, b / n - mu * mu);
      mean.at(x, y) = mu;
      var.at(x, y) = sigma2;
      var_sum += sigma2;
    }
  }
  const double noise = var_sum / static_cast<double>(slice.size());

  Image2D out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mu = mean.data[i], sigma2 = var.data[i];
    const double denom = std::max(sigma2, noise);
    const double gain = denom > 0.0 ? std::max(sigma2 - noise, 0.0) / denom : 0.0;
    out.data[i] = mu + gain * (slice.data[i] - mu);
  }
  return out;
}

Seed refine_seed(const Image2D& slice, const Seed& seed, int window) {
  require_odd_window(window);
  require_seed_in(slice, seed);
  const int half = window / 2;
  Seed best = seed;
  double best_value = std::numeric_limits<double>::infinity();
  for (int y = std::max(0, seed.y - half); y <= std::min(slice.height - 1, seed.y + half); ++y) {
    for (int x = std::max(0, seed.x - half); x <= std::min(slice.width - 1, seed.x + half); ++x) {
      if (slice.at(x, y) < best_value) {
        best_value = slice.at(x, y);
        best = {seed.z, x, y};
      }
    }
  }
  return best;
}

std::pair<double, double> center_and_dmax(const Image2D& slice, const Seed& seed, int window) {
  require_odd_window(window);
  require_seed_in(slice, seed);
  const int half = window / 2;
  const double vc = slice.at(seed.x, seed.y);
  double dmax = -std::numeric_limits<double>::infinity();
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (std::max(std::abs(dx), std::abs(dy)) != half) continue;
      const int x = seed.x + dx, y = seed.y + dy;
      if (slice.contains(x, y)) dmax = std::max(dmax, slice.at(x, y) - vc);
    }
  }
  if (!std::isfinite(dmax)) dmax = 0.0;
  return {vc, dmax};
}

double initial_threshold(const Image2D& slice, const Seed& seed, int window) {
  const auto [vc, dmax] = center_and_dmax(slice, seed, window);
  return vc + 0.25 * dmax;
}

Mask2D grow_region(const Image2D& slice, const Seed& seed, double threshold, const Mask2D* bound) {
  require_seed_in(slice, seed);
  if (bound && (bound->width != slice.width || bound->height != slice.height)) {
    throw Error(Errc::dimension_mismatch, "bound", "bound shape does not match slice");
  }
  auto admissible = [&](int x, int y) {
    return slice.at(x, y) <= threshold && (!bound || bound->at(x, y));
  };
  if (!admissible(seed.x, seed.y)) {
    throw Error(Errc::empty_growth, "threshold", "seed value exceeds threshold or lies outside bound");
  }
  Mask2D mask(slice.width, slice.height, 0);
  std::deque<Pixel> queue{{seed.x, seed.y}};
  mask.at(seed.x, seed.y) = 1;
  while (!queue.empty()) {
    const Pixel p = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (!slice.contains(nx, ny) || mask.at(nx, ny) || !admissible(nx, ny)) continue;
        mask.at(nx, ny) = 1;
        queue.push_back({nx, ny});
      }
    }
  }
  return mask;
}

double layer_contrast(const Image2D& slice, const Mask2D& mask) {
  if (mask.width != slice.width || mask.height != slice.height) {
    throw Error(Errc::dimension_mismatch, "mask", "mask shape does not match slice");
  }
  require_nonempty(mask, "mask");
  const Mask2D ring = outer_ring(mask);
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i]) {
      inside += slice.data[i];
      ++n_in;
    } else if (ring.data[i]) {
      outside += slice.data[i];
      ++n_out;
    }
  }
  if (n_out == 0) return 0.0;
  return outside / static_cast<double>(n_out) - inside / static_cast<double>(n_in);
}

GrowthResult multilayer_grow(const Image2D& slice, const Seed& seed, const MultilayerOptions& options) {
  if (options.max_layers < 1) throw Error(Errc::invalid_argument, "max_layers", "must be >= 1");
  GrowthResult out;
  LayerTrace& trace = out.trace;
  trace.beta = options.beta;
  std::tie(trace.vc, trace.dmax) = center_and_dmax(slice, seed, options.window);

  double threshold = trace.vc + 0.25 * trace.dmax;
  if (options.ceiling) threshold = std::min(threshold, *options.ceiling);
  out.mask = grow_region(slice, seed, threshold, options.bound);
  std::size_t area = mask_area(out.mask);
  double contrast = layer_contrast(slice, out.mask);
  trace.layers.push_back({threshold, area, contrast});

  while (true) {
    if (static_cast<int>(trace.layers.size()) >= options.max_layers) {
      trace.stop_reason = StopReason::max_layers;
      break;
    }
    double next_threshold = threshold + options.beta * contrast;
    if (options.ceiling) next_threshold = std::min(next_threshold, *options.ceiling);
    if (!(next_threshold > threshold)) {
      trace.stop_reason = StopReason::no_growth;
      break;
    }
    Mask2D next = grow_region(slice, seed, next_threshold, options.bound);
    const std::size_t next_area = mask_area(next);
    if (next_area > 2 * area) {
      trace.rejected = Layer{next_threshold, next_area, layer_contrast(slice, next)};
      trace.stop_reason = StopReason::ratio_exceeded;
      break;
    }
    if (next_area == area) {
      trace.stop_reason = StopReason::no_growth;
      break;
    }
    out.mask = std::move(next);
    threshold = next_threshold;
    area = next_area;
    contrast = layer_contrast(slice, out.mask);
    trace.layers.push_back({threshold, area, contrast});
  }
  return out;
}

Mask2D active_contour_refine(const Image2D& slice, const Mask2D& mask, int iterations, int band_px,
                             double smoothing) {
  if (mask.width != slice.width || mask.height != slice.height) {
    throw Error(Errc::dimension_mismatch, "mask", "mask shape does not match slice");
  }
  require_nonempty(mask, "mask");
  if (iterations < 0) throw Error(Errc::invalid_argument, "iterations", "must be >= 0");
  if (iterations == 0) return mask;

  const Mask2D domain = dilate(mask, band_px);
  Mask2D state = mask;
  const int w = slice.width, h = slice.height;

  for (int it = 0; it < iterations; ++it) {
    double sum_in = 0.0, sum_out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (!domain.data[i]) continue;
      if (state.data[i]) {
        sum_in += slice.data[i];
        ++n_in;
      } else {
        sum_out += slice.data[i];
        ++n_out;
      }
    }
    if (n_in == 0 || n_out == 0) break;
    const double c_in = sum_in / static_cast<double>(n_in);
    const double c_out = sum_out / static_cast<double>(n_out);
    const double scale = (c_in - c_out) * (c_in - c_out);
    if (scale < 1e-12) break;

    Mask2D next = state;
    bool changed = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!domain.at(x, y)) continue;
        const bool inside = state.at(x, y) != 0;
        int count = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            count += state.contains(nx, ny) && state.at(nx, ny);
          }
        }
        // Region term: positive when the pixel is closer to the inside mean.
        const double v = slice.at(x, y);
        const double region = ((v - c_out) * (v - c_out) - (v - c_in) * (v - c_in)) / scale;
        // Curvature proxy: local inside fraction mapped to [-1, 1].
        const double curvature = (static_cast<double>(count) - 4.5) / 4.5;
        const double force = region + smoothing * curvature;
        if (force > 0.0 && !inside) {
          next.at(x, y) = 1;
          changed = true;
        } else if (force < 0.0 && inside) {
          next.at(x, y) = 0;
          changed = true;
        }
      }
    }
    if (!changed) break;
    state = std::move(next);
  }
  return state;
}

namespace {

Pixel rounded_centroid(const Mask2D& mask) {
  double sx = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  return {static_cast<int>(std::round(sx / static_cast<double>(n))),
          static_cast<int>(std::round(sy / static_cast<double>(n)))};
}

double mask_mean(const Image2D& slice, const Mask2D& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.data[i]) sum += slice.data[i], ++n;
  }
  return sum / static_cast<double>(n);
}

// Re-runs the band-limited contour from its own output so a first layer far
// smaller than the lesion can still reach the lesion edge.
Mask2D refine_rounds(const Image2D& slice, const Mask2D& mask, const SegmentationParams& p) {
  Mask2D state = mask;
  for (int round = 0; round < std::max(1, p.contour_rounds); ++round) {
    Mask2D next = active_contour_refine(slice, state, p.contour_iterations, p.contour_band_px, p.contour_smoothing);
    if (next == state || mask_area(next) == 0) return next;
    state = std::move(next);
  }
  return state;
}

}  // namespace

SegmentationResult propagate_volume(const CtVolume& volume, const Seed& seed, const SegmentationParams& params) {
  validate(volume);
  if (seed.z < 0 || seed.z >= volume.dims.nz || seed.x < 0 || seed.x >= volume.dims.nx || seed.y < 0 ||
      seed.y >= volume.dims.ny) {
    throw Error(Errc::out_of_range, "seed", "seed outside volume");
  }
  std::vector<std::optional<Image2D>> filtered(static_cast<std::size_t>(volume.dims.nz));
  auto filtered_slice = [&](int z) -> const Image2D& {
    auto& slot = filtered[static_cast<std::size_t>(z)];
    if (!slot) slot = wiener_filter(volume.slice(z), params.wiener_window);
    return *slot;
  };

  SegmentationResult result;
  result.mask = SegmentationMask::empty_like(volume);

  const Image2D& seed_slice = filtered_slice(seed.z);
  const Seed refined = refine_seed(seed_slice, seed, params.seed_window);
  result.seed_used = refined;
  MultilayerOptions grow_opts{params.beta, params.max_layers, params.seed_window, nullptr, std::nullopt};
  GrowthResult first = multilayer_grow(seed_slice, refined, grow_opts);
  Mask2D seed_mask = refine_rounds(seed_slice, first.mask, params);
  if (mask_area(seed_mask) == 0) throw Error(Errc::empty_growth, "seed", "seed slice segmentation is empty");
  // Halfway between the refined lesion and its surrounding ring.
  result.intensity_ceiling = mask_mean(seed_slice, seed_mask) + 0.5 * layer_contrast(seed_slice, seed_mask);
  result.mask.set_slice(seed.z, seed_mask);
  result.per_slice[seed.z] = SliceRecord{mask_area(seed_mask), SliceKind::seed, {first.trace}, {refined}};

  const int half = params.extra_seed_window / 2;
  for (const int direction : {+1, -1}) {
    Rng rng(derive_seed(params.run_seed, direction > 0 ? 1 : 2));
    Mask2D previous = seed_mask;
    for (int z = seed.z + direction; z >= 0 && z < volume.dims.nz; z += direction) {
      const Pixel c = rounded_centroid(previous);
      std::array<Pixel, 3> mapped{c, c, c};
      for (int k = 1; k < 3; ++k) {
        mapped[k].x += rng.uniform_int(-half, half);
        mapped[k].y += rng.uniform_int(-half, half);
      }
      const Image2D& slice = filtered_slice(z);
      const Mask2D bound = dilate(previous, params.propagation_bound_px);
      MultilayerOptions opts{params.beta, params.max_layers, params.seed_window, &bound, result.intensity_ceiling};

      SliceRecord record{0, SliceKind::propagated, {}, {}};
      Mask2D grown(slice.width, slice.height, 0);
      for (Pixel p : mapped) {
        p.x = std::clamp(p.x, 0, slice.width - 1);
        p.y = std::clamp(p.y, 0, slice.height - 1);
        const Seed s = refine_seed(slice, Seed{z, p.x, p.y}, params.seed_window);
        if (!bound.at(s.x, s.y) || slice.at(s.x, s.y) > result.intensity_ceiling) continue;
        GrowthResult g = multilayer_grow(slice, s, opts);
        grown = mask_union(grown, g.mask);
        record.traces.push_back(std::move(g.trace));
        record.seeds.push_back(s);
      }
      if (record.traces.empty()) break;
      Mask2D refined_mask = mask_intersection(refine_rounds(slice, grown, params), bound);
      record.area_px = mask_area(refined_mask);
      if (record.area_px < params.min_slice_area) break;
      result.mask.set_slice(z, refined_mask);
      result.per_slice[z] = std::move(record);
      previous = std::move(refined_mask);
    }
  }
  return result;
}

nlohmann::json trace_to_json(const SegmentationResult& result) {
  using nlohmann::json;
  auto layer_json = [](const Layer& l) {
    return json{{"threshold", l.threshold}, {"area_px", l.area_px}, {"contrast", l.contrast}};
  };
  json slices = json::array();
  for (const auto& [z, rec] : result.per_slice) {
    json traces = json::array();
    for (const LayerTrace& t : rec.traces) {
      json layers = json::array();
      for (const Layer& l : t.layers) layers.push_back(layer_json(l));
      json jt{{"vc", t.vc},
              {"dmax", t.dmax},
              {"beta", t.beta},
              {"stop_reason", stop_reason_name(t.stop_reason)},
              {"layers", layers}};
      if (t.rejected) jt["rejected"] = layer_json(*t.rejected);
      traces.push_back(std::move(jt));
    }
    json seeds = json::array();
    for (const Seed& s : rec.seeds) seeds.push_back({{"z", s.z}, {"x", s.x}, {"y", s.y}});
    slices.push_back({{"z", z},
                      {"area_px", rec.area_px},
                      {"kind", rec.kind == SliceKind::seed ? "seed" : "propagated"},
                      {"seeds", seeds},
                      {"traces", traces}});
  }
  return json{{"case_id", result.mask.case_id},
              {"seed_used", {{"z", result.seed_used.z}, {"x", result.seed_used.x}, {"y", result.seed_used.y}}},
              {"intensity_ceiling", result.intensity_ceiling},
              {"slices", slices}};
}

}  // namespace pmcad
