#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmcad/grid.hpp"

namespace pmcad {

struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::size_t slice_size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;
  bool operator==(const Spacing&) const = default;
};

// Signed 16-bit CT grid, row-major with x fastest, then y, then z.
struct CtVolume {
  std::string case_id;
  Dims dims;
  Spacing spacing_mm;
  std::vector<std::int16_t> voxels;

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims.ny + y) * dims.nx + x;
  }
  std::int16_t at(int x, int y, int z) const { return voxels[index(x, y, z)]; }
  Image2D slice(int z) const;

  bool operator==(const CtVolume&) const = default;
};

struct SegmentationMask {
  std::string case_id;
  Dims dims;
  std::vector<std::uint8_t> bits;

  static SegmentationMask empty_like(const CtVolume& volume);

  Mask2D slice(int z) const;
  void set_slice(int z, const Mask2D& mask);
  std::size_t slice_area(int z) const;

  bool operator==(const SegmentationMask&) const = default;
};

struct DisplayWindow {
  double level = 40.0;
  double width = 400.0;
};

struct Gray8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

// Throws Error on invalid dims/spacing or voxel-count mismatch.
void validate(const CtVolume& volume);
void validate(const SegmentationMask& mask);

CtVolume load_volume(const std::filesystem::path& path);
void save_volume(const CtVolume& volume, const std::filesystem::path& path);
SegmentationMask load_mask(const std::filesystem::path& path);
void save_mask(const SegmentationMask& mask, const std::filesystem::path& path);

// In-memory forms of the container, used by the file functions above.
std::string encode_volume(const CtVolume& volume);
CtVolume decode_volume(const std::string& bytes);
std::string encode_mask(const SegmentationMask& mask);
SegmentationMask decode_mask(const std::string& bytes);

std::uint8_t window_gray(double value, const DisplayWindow& window);
Gray8Image export_slice_image(const CtVolume& volume, int z, const DisplayWindow& window);
Gray8Image export_mask_image(const SegmentationMask& mask, int z);

std::string encode_png(const Gray8Image& image);
Gray8Image decode_png(const std::string& bytes);

}  // namespace pmcad
