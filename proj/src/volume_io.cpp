#include "pmcad/volume_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pmcad/error.hpp"

namespace pmcad {

namespace {

using nlohmann::json;

constexpr const char* kMagic = "PTV1";

void validate_dims(const Dims& d) {
  if (d.nx < 1) throw Error(Errc::invalid_dims, "dims.nx", "must be >= 1");
  if (d.ny < 1) throw Error(Errc::invalid_dims, "dims.ny", "must be >= 1");
  if (d.nz < 1) throw Error(Errc::invalid_dims, "dims.nz", "must be >= 1");
}

void validate_spacing(const Spacing& s) {
  if (!(s.sx > 0) || !std::isfinite(s.sx)) throw Error(Errc::invalid_spacing, "spacing_mm.sx", "must be > 0");
  if (!(s.sy > 0) || !std::isfinite(s.sy)) throw Error(Errc::invalid_spacing, "spacing_mm.sy", "must be > 0");
  if (!(s.sz > 0) || !std::isfinite(s.sz)) throw Error(Errc::invalid_spacing, "spacing_mm.sz", "must be > 0");
}

std::string header_line(const std::string& kind, const std::string& case_id, const Dims& dims,
                        const Spacing* spacing) {
  json h;
  h["magic"] = kMagic;
  h["kind"] = kind;
  h["case_id"] = case_id;
  h["dims"] = {dims.nx, dims.ny, dims.nz};
  if (spacing) h["spacing_mm"] = {spacing->sx, spacing->sy, spacing->sz};
  return h.dump() + "\n";
}

struct ParsedHeader {
  std::string case_id;
  Dims dims;
  Spacing spacing;
  std::size_t payload_offset = 0;
};

ParsedHeader parse_header(const std::string& bytes, const std::string& expected_kind) {
  const auto eol = bytes.find('\n');
  if (bytes.empty() || bytes.front() != '{' || eol == std::string::npos) {
    throw Error(Errc::bad_magic, "magic", "not a PTV1 container");
  }
  json h = json::parse(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(eol), nullptr, false);
  if (h.is_discarded() || !h.is_object()) throw Error(Errc::bad_header, "header", "header line is not a JSON object");
  if (!h.contains("magic") || h["magic"] != kMagic) throw Error(Errc::bad_magic, "magic", "expected PTV1");
  if (!h.contains("kind") || !h["kind"].is_string()) throw Error(Errc::bad_header, "kind", "missing kind");
  if (h["kind"] != expected_kind) {
    throw Error(Errc::wrong_kind, "kind", "expected " + expected_kind + ", found " + h["kind"].get<std::string>());
  }
  ParsedHeader out;
  if (!h.contains("case_id") || !h["case_id"].is_string()) throw Error(Errc::bad_header, "case_id", "missing case_id");
  out.case_id = h["case_id"].get<std::string>();

  const json& d = h.value("dims", json());
  if (!d.is_array() || d.size() != 3) throw Error(Errc::invalid_dims, "dims", "expected [nx, ny, nz]");
  for (int i = 0; i < 3; ++i) {
    if (!d[i].is_number_integer()) throw Error(Errc::invalid_dims, "dims", "dims must be integers");
  }
  out.dims = {d[0].get<int>(), d[1].get<int>(), d[2].get<int>()};
  validate_dims(out.dims);

  if (expected_kind == "volume") {
    const json& s = h.value("spacing_mm", json());
    if (!s.is_array() || s.size() != 3 || !s[0].is_number() || !s[1].is_number() || !s[2].is_number()) {
      throw Error(Errc::invalid_spacing, "spacing_mm", "expected [sx, sy, sz]");
    }
    out.spacing = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    validate_spacing(out.spacing);
  }
  out.payload_offset = eol + 1;
  return out;
}

void check_payload_length(std::size_t actual, std::size_t expected) {
  if (actual < expected) {
    throw Error(Errc::truncated_payload, "payload",
                "expected " + std::to_string(expected) + " bytes, found " + std::to_string(actual));
  }
  if (actual > expected) {
    throw Error(Errc::trailing_payload, "payload",
                "expected " + std::to_string(expected) + " bytes, found " + std::to_string(actual));
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::missing_file, "path", "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "path", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "path", "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io_failure, "path", "write failed for " + path.string());
}

}  // namespace

Image2D CtVolume::slice(int z) const {
  if (z < 0 || z >= dims.nz) throw Error(Errc::out_of_range, "z", "slice index out of range");
  Image2D out(dims.nx, dims.ny);
  const std::size_t base = static_cast<std::size_t>(z) * dims.slice_size();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = voxels[base + i];
  return out;
}

SegmentationMask SegmentationMask::empty_like(const CtVolume& volume) {
  return {volume.case_id, volume.dims, std::vector<std::uint8_t>(volume.dims.voxel_count(), 0)};
}

Mask2D SegmentationMask::slice(int z) const {
  if (z < 0 || z >= dims.nz) throw Error(Errc::out_of_range, "z", "slice index out of range");
  Mask2D out(dims.nx, dims.ny);
  const std::size_t base = static_cast<std::size_t>(z) * dims.slice_size();
  std::copy_n(bits.begin() + static_cast<std::ptrdiff_t>(base), out.size(), out.data.begin());
  return out;
}

void SegmentationMask::set_slice(int z, const Mask2D& mask) {
  if (z < 0 || z >= dims.nz) throw Error(Errc::out_of_range, "z", "slice index out of range");
  if (mask.width != dims.nx || mask.height != dims.ny) {
    throw Error(Errc::dimension_mismatch, "mask", "slice shape does not match volume");
  }
  const std::size_t base = static_cast<std::size_t>(z) * dims.slice_size();
  for (std::size_t i = 0; i < mask.size(); ++i) bits[base + i] = mask.data[i] ? 1 : 0;
}

std::size_t SegmentationMask::slice_area(int z) const {
  const std::size_t base = static_cast<std::size_t>(z) * dims.slice_size();
  return static_cast<std::size_t>(std::count_if(bits.begin() + static_cast<std::ptrdiff_t>(base),
                                                bits.begin() + static_cast<std::ptrdiff_t>(base + dims.slice_size()),
                                                [](std::uint8_t b) { return b != 0; }));
}

void validate(const CtVolume& volume) {
  validate_dims(volume.dims);
  validate_spacing(volume.spacing_mm);
  if (volume.voxels.size() != volume.dims.voxel_count()) {
    throw Error(Errc::dimension_mismatch, "voxels", "voxel count does not equal nx*ny*nz");
  }
}

void validate(const SegmentationMask& mask) {
  validate_dims(mask.dims);
  if (mask.bits.size() != mask.dims.voxel_count()) {
    throw Error(Errc::dimension_mismatch, "bits", "bit count does not equal nx*ny*nz");
  }
}

std::string encode_volume(const CtVolume& volume) {
  validate(volume);
  std::string out = header_line("volume", volume.case_id, volume.dims, &volume.spacing_mm);
  const std::size_t offset = out.size();
  out.resize(offset + volume.voxels.size() * 2);
  for (std::size_t i = 0; i < volume.voxels.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(volume.voxels[i]);
    out[offset + 2 * i] = static_cast<char>(u & 0xff);
    out[offset + 2 * i + 1] = static_cast<char>(u >> 8);
  }
  return out;
}

CtVolume decode_volume(const std::string& bytes) {
  const ParsedHeader h = parse_header(bytes, "volume");
  const std::size_t n = h.dims.voxel_count();
  check_payload_length(bytes.size() - h.payload_offset, n * 2);
  CtVolume v{h.case_id, h.dims, h.spacing, std::vector<std::int16_t>(n)};
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.payload_offset);
  for (std::size_t i = 0; i < n; ++i) {
    v.voxels[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[2 * i] | (p[2 * i + 1] << 8)));
  }
  return v;
}

std::string encode_mask(const SegmentationMask& mask) {
  validate(mask);
  std::string out = header_line("mask", mask.case_id, mask.dims, nullptr);
  out.reserve(out.size() + mask.bits.size());
  for (std::uint8_t b : mask.bits) out.push_back(b ? 1 : 0);
  return out;
}

SegmentationMask decode_mask(const std::string& bytes) {
  const ParsedHeader h = parse_header(bytes, "mask");
  const std::size_t n = h.dims.voxel_count();
  check_payload_length(bytes.size() - h.payload_offset, n);
  SegmentationMask m{h.case_id, h.dims, std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[h.payload_offset + i]);
    if (b > 1) throw Error(Errc::bad_header, "payload", "mask payload bytes must be 0 or 1");
    m.bits[i] = b;
  }
  return m;
}

CtVolume load_volume(const std::filesystem::path& path) { return decode_volume(read_file(path)); }
void save_volume(const CtVolume& volume, const std::filesystem::path& path) {
  write_file(path, encode_volume(volume));
}
SegmentationMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }
void save_mask(const SegmentationMask& mask, const std::filesystem::path& path) {
  write_file(path, encode_mask(mask));
}

std::uint8_t window_gray(double value, const DisplayWindow& window) {
  if (!(window.width > 0)) throw Error(Errc::invalid_argument, "window.width", "must be > 0");
  const double t = std::clamp((value - (window.level - window.width / 2.0)) / window.width, 0.0, 1.0);
  // std::round rounds half away from zero.
  return static_cast<std::uint8_t>(std::round(255.0 * t));
}

Gray8Image export_slice_image(const CtVolume& volume, int z, const DisplayWindow& window) {
  if (z < 0 || z >= volume.dims.nz) throw Error(Errc::out_of_range, "z", "slice index out of range");
  if (!(window.width > 0)) throw Error(Errc::invalid_argument, "window.width", "must be > 0");
  Gray8Image img{volume.dims.nx, volume.dims.ny, std::vector<std::uint8_t>(volume.dims.slice_size())};
  const std::size_t base = static_cast<std::size_t>(z) * volume.dims.slice_size();
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = window_gray(volume.voxels[base + i], window);
  return img;
}

Gray8Image export_mask_image(const SegmentationMask& mask, int z) {
  const Mask2D m = mask.slice(z);
  Gray8Image img{m.width, m.height, std::vector<std::uint8_t>(m.size())};
  for (std::size_t i = 0; i < m.size(); ++i) img.pixels[i] = m.data[i] ? 255 : 0;
  return img;
}

namespace {

void png_write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), length);
}

void png_flush_noop(png_structp) {}

struct PngReadCursor {
  const std::string* bytes;
  std::size_t pos;
};

void png_read_from_string(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->pos, length);
  cur->pos += length;
}

}  // namespace

std::string encode_png(const Gray8Image& image) {
  if (image.width < 1 || image.height < 1 ||
      image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    throw Error(Errc::invalid_argument, "image", "bad image shape");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(Errc::io_failure, "png", "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::string out;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error(Errc::io_failure, "png", "PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_string, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Gray8Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw Error(Errc::bad_magic, "png", "not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(Errc::io_failure, "png", "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Gray8Image img;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    throw Error(Errc::io_failure, "png", "PNG decoding failed");
  }
  PngReadCursor cursor{&bytes, 0};
  png_set_read_fn(png, &cursor, png_read_from_string);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_error(png, "only 8-bit grayscale supported");
  }
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, img.pixels.data() + static_cast<std::size_t>(y) * img.width, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace pmcad
