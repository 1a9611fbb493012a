#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmcad/segmentation.hpp"
#include "pmcad/volume_io.hpp"

namespace pmcad {

struct PhantomSpec {
  Dims dims{64, 64, 20};
  Spacing spacing_mm{0.8, 0.8, 2.5};
  double background_hu = 120.0;
  double lesion_hu = 40.0;
  // Ellipsoid semi-axes in voxels.
  double radius_x = 12.0;
  double radius_y = 10.0;
  double radius_z = 4.5;
  // In-lesion texture, indexed by label (0 = non-PM, 1 = PM).
  double noise_std[2] = {6.0, 18.0};
  double smoothing_sigma[2] = {1.5, 0.5};
  // Mild scanner noise over the whole volume.
  double global_noise_std = 4.0;
  // Lesion center is offset from the volume center by up to this many voxels per axis.
  int center_jitter = 2;
  std::uint64_t seed = 0;
};

void validate(const PhantomSpec& spec);
nlohmann::json to_json(const PhantomSpec& spec);
PhantomSpec phantom_spec_from_json(const nlohmann::json& j, PhantomSpec base = {});

struct PhantomCase {
  CtVolume volume;
  SegmentationMask truth;
  int label = 0;
  Seed seed;
};

PhantomCase generate_case(const PhantomSpec& spec, int label, std::uint64_t case_seed,
                          const std::string& case_id = "phantom");

struct ManifestEntry {
  std::string case_id;
  int label = 0;
  std::optional<Seed> seed;
  // Absolute after read_manifest; written relative to the manifest directory.
  std::filesystem::path volume_path;
  std::filesystem::path truth_mask_path;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

// Writes <out_dir>/volumes, <out_dir>/truth and <out_dir>/manifest.csv. PM
// cases come first. Returns the manifest path.
std::filesystem::path generate_dataset(const PhantomSpec& spec, int n_pm, int n_non, std::uint64_t seed,
                                       const std::filesystem::path& out_dir);

std::string case_id_for(int index);

}  // namespace pmcad
