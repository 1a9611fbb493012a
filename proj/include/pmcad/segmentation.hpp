#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcad/grid.hpp"
#include "pmcad/volume_io.hpp"

namespace pmcad {

struct Seed {
  int z = 0;
  int x = 0;
  int y = 0;
  bool operator==(const Seed&) const = default;
};

enum class StopReason { ratio_exceeded, no_growth, max_layers };
const char* stop_reason_name(StopReason r);

struct Layer {
  double threshold = 0.0;
  std::size_t area_px = 0;
  double contrast = 0.0;
  bool operator==(const Layer&) const = default;
};

// Accepted layers in growth order. `rejected` holds the layer discarded by the
// leakage rule, when there was one.
struct LayerTrace {
  std::vector<Layer> layers;
  std::optional<Layer> rejected;
  double beta = 0.5;
  double dmax = 0.0;
  double vc = 0.0;
  StopReason stop_reason = StopReason::no_growth;

  double final_threshold() const { return layers.back().threshold; }
  bool operator==(const LayerTrace&) const = default;
};

struct GrowthResult {
  Mask2D mask;
  LayerTrace trace;
};

struct SegmentationParams {
  int wiener_window = 5;
  int seed_window = 5;
  double beta = 0.5;
  int max_layers = 20;
  int contour_iterations = 50;
  int contour_band_px = 10;
  double contour_smoothing = 0.5;
  // Contour passes per slice; each pass is confined to its input dilated by
  // contour_band_px, and passes stop at a fixed point.
  int contour_rounds = 8;
  int propagation_bound_px = 5;
  std::size_t min_slice_area = 5;
  int extra_seed_window = 5;
  std::uint64_t run_seed = 0;
};

enum class SliceKind { seed, propagated };

struct SliceRecord {
  std::size_t area_px = 0;
  SliceKind kind = SliceKind::seed;
  // One trace on the seed slice; one per successfully grown seed otherwise.
  std::vector<LayerTrace> traces;
  std::vector<Seed> seeds;
  bool operator==(const SliceRecord&) const = default;
};

struct SegmentationResult {
  SegmentationMask mask;
  std::map<int, SliceRecord> per_slice;
  Seed seed_used;
  // Lesion intensity ceiling carried from the seed slice into propagation.
  double intensity_ceiling = 0.0;
};

Image2D wiener_filter(const Image2D& slice, int window = 5);

Seed refine_seed(const Image2D& slice, const Seed& seed, int window = 5);

double initial_threshold(const Image2D& slice, const Seed& seed, int window = 5);
// Components of initial_threshold: the centre value and the largest
// boundary-ring excess over it.
std::pair<double, double> center_and_dmax(const Image2D& slice, const Seed& seed, int window = 5);

Mask2D grow_region(const Image2D& slice, const Seed& seed, double threshold,
                   const Mask2D* bound = nullptr);

double layer_contrast(const Image2D& slice, const Mask2D& mask);

struct MultilayerOptions {
  double beta = 0.5;
  int max_layers = 20;
  int window = 5;
  const Mask2D* bound = nullptr;
  // Thresholds never exceed this value when set.
  std::optional<double> ceiling;
};

GrowthResult multilayer_grow(const Image2D& slice, const Seed& seed, const MultilayerOptions& options = {});

Mask2D active_contour_refine(const Image2D& slice, const Mask2D& mask, int iterations = 50,
                             int band_px = 10, double smoothing = 0.5);

SegmentationResult propagate_volume(const CtVolume& volume, const Seed& seed,
                                    const SegmentationParams& params = {});

nlohmann::json trace_to_json(const SegmentationResult& result);

}  // namespace pmcad
