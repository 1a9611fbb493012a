#include "pmcad/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pmcad/error.hpp"
#include "pmcad/parallel.hpp"
#include "pmcad/rng.hpp"

namespace fs = std::filesystem;

namespace pmcad {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur along one axis of an nx*ny plane, clamping at the border.
void blur_axis(std::vector<double>& plane, int nx, int ny, const std::vector<double>& k, bool along_x) {
  const int radius = static_cast<int>(k.size() / 2);
  std::vector<double> out(plane.size());
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int sx = along_x ? std::clamp(x + i, 0, nx - 1) : x;
        const int sy = along_x ? y : std::clamp(y + i, 0, ny - 1);
        acc += k[i + radius] * plane[static_cast<std::size_t>(sy) * nx + sx];
      }
      out[static_cast<std::size_t>(y) * nx + x] = acc;
    }
  }
  plane.swap(out);
}

// Texture field for one slice: i.i.d. standard normals, Gaussian-blurred
// by sigma (so smoothing also lowers the amplitude).
std::vector<double> texture_plane(Rng& rng, int nx, int ny, double sigma) {
  std::vector<double> plane(static_cast<std::size_t>(nx) * ny);
  for (double& v : plane) v = rng.normal();
  if (sigma <= 0.0) return plane;
  const auto k = gaussian_kernel(sigma);
  blur_axis(plane, nx, ny, k, true);
  blur_axis(plane, nx, ny, k, false);
  return plane;
}

std::int16_t to_hu(double v) {
  const double r = std::round(v);
  return static_cast<std::int16_t>(std::clamp(r, -32768.0, 32767.0));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(Errc::bad_header, field, "line " + std::to_string(line_no) + ": expected integer, got '" + s + "'");
}

}  // namespace

void validate(const PhantomSpec& s) {
  if (s.dims.nx < 1 || s.dims.ny < 1 || s.dims.nz < 1) throw Error(Errc::invalid_dims, "dims", "dims must be positive");
  if (!(s.spacing_mm.sx > 0 && s.spacing_mm.sy > 0 && s.spacing_mm.sz > 0)) {
    throw Error(Errc::invalid_spacing, "spacing_mm", "spacing must be positive");
  }
  if (!(s.radius_x > 0 && s.radius_y > 0 && s.radius_z > 0)) {
    throw Error(Errc::invalid_argument, "radius", "lesion radii must be positive");
  }
  for (int c = 0; c < 2; ++c) {
    if (!(s.noise_std[c] >= 0)) throw Error(Errc::invalid_argument, "noise_std", "must be >= 0");
    if (!(s.smoothing_sigma[c] >= 0)) throw Error(Errc::invalid_argument, "smoothing_sigma", "must be >= 0");
  }
  if (!(s.global_noise_std >= 0)) throw Error(Errc::invalid_argument, "global_noise_std", "must be >= 0");
  if (s.center_jitter < 0) throw Error(Errc::invalid_argument, "center_jitter", "must be >= 0");
  // Worst-case jittered lesion plus a 2-voxel margin must stay inside.
  const auto fits = [&](int n, double r, const char* axis) {
    const int c = (n - 1) / 2;
    const double lo = c - s.center_jitter - r - 2.0;
    const double hi = c + s.center_jitter + r + 2.0;
    if (lo < 0.0 || hi > n - 1) {
      throw Error(Errc::out_of_range, std::string("radius_") + axis, "lesion does not fit with a 2-voxel margin");
    }
  };
  fits(s.dims.nx, s.radius_x, "x");
  fits(s.dims.ny, s.radius_y, "y");
  fits(s.dims.nz, s.radius_z, "z");
}

nlohmann::json to_json(const PhantomSpec& s) {
  return {{"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
          {"spacing_mm", {s.spacing_mm.sx, s.spacing_mm.sy, s.spacing_mm.sz}},
          {"background_hu", s.background_hu},
          {"lesion_hu", s.lesion_hu},
          {"radii", {s.radius_x, s.radius_y, s.radius_z}},
          {"noise_std", {{"class_pm", s.noise_std[1]}, {"class_non_pm", s.noise_std[0]}}},
          {"smoothing_sigma", {{"class_pm", s.smoothing_sigma[1]}, {"class_non_pm", s.smoothing_sigma[0]}}},
          {"global_noise_std", s.global_noise_std},
          {"center_jitter", s.center_jitter},
          {"seed", s.seed}};
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j, PhantomSpec s) {
  if (j.contains("dims")) {
    const auto& d = j["dims"];
    s.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
  }
  if (j.contains("spacing_mm")) {
    const auto& d = j["spacing_mm"];
    s.spacing_mm = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
  }
  s.background_hu = j.value("background_hu", s.background_hu);
  s.lesion_hu = j.value("lesion_hu", s.lesion_hu);
  if (j.contains("radii")) {
    const auto& r = j["radii"];
    s.radius_x = r.at(0).get<double>();
    s.radius_y = r.at(1).get<double>();
    s.radius_z = r.at(2).get<double>();
  }
  if (j.contains("noise_std")) {
    s.noise_std[1] = j["noise_std"].value("class_pm", s.noise_std[1]);
    s.noise_std[0] = j["noise_std"].value("class_non_pm", s.noise_std[0]);
  }
  if (j.contains("smoothing_sigma")) {
    s.smoothing_sigma[1] = j["smoothing_sigma"].value("class_pm", s.smoothing_sigma[1]);
    s.smoothing_sigma[0] = j["smoothing_sigma"].value("class_non_pm", s.smoothing_sigma[0]);
  }
  s.global_noise_std = j.value("global_noise_std", s.global_noise_std);
  s.center_jitter = j.value("center_jitter", s.center_jitter);
  s.seed = j.value("seed", s.seed);
  return s;
}

PhantomCase generate_case(const PhantomSpec& spec, int label, std::uint64_t case_seed, const std::string& case_id) {
  validate(spec);
  if (label != 0 && label != 1) throw Error(Errc::invalid_argument, "label", "label must be 0 or 1");
  const Dims d = spec.dims;
  Rng rng(case_seed);
  const int j = spec.center_jitter;
  const int cx = (d.nx - 1) / 2 + rng.uniform_int(-j, j);
  const int cy = (d.ny - 1) / 2 + rng.uniform_int(-j, j);
  const int cz = (d.nz - 1) / 2 + rng.uniform_int(-j, j);

  PhantomCase out;
  out.label = label;
  out.volume.case_id = case_id;
  out.volume.dims = d;
  out.volume.spacing_mm = spec.spacing_mm;
  out.volume.voxels.resize(d.voxel_count());
  out.truth.case_id = case_id;
  out.truth.dims = d;
  out.truth.bits.assign(d.voxel_count(), 0);

  Rng texture_rng(derive_seed(case_seed, 1));
  Rng scanner_rng(derive_seed(case_seed, 2));
  const double tex_std = spec.noise_std[label];
  const double sigma = spec.smoothing_sigma[label];
  for (int z = 0; z < d.nz; ++z) {
    // Drawn for every slice so each slice's field does not depend on lesion extent.
    const auto tex = texture_plane(texture_rng, d.nx, d.ny, sigma);
    for (int y = 0; y < d.ny; ++y) {
      for (int x = 0; x < d.nx; ++x) {
        const double ex = (x - cx) / spec.radius_x;
        const double ey = (y - cy) / spec.radius_y;
        const double ez = (z - cz) / spec.radius_z;
        const bool inside = ex * ex + ey * ey + ez * ez <= 1.0;
        const std::size_t i = out.volume.index(x, y, z);
        double v = spec.background_hu;
        if (inside) {
          out.truth.bits[i] = 1;
          v = spec.lesion_hu + tex_std * tex[static_cast<std::size_t>(y) * d.nx + x];
        }
        const double g = scanner_rng.normal();
        if (spec.global_noise_std > 0) v += spec.global_noise_std * g;
        out.volume.voxels[i] = to_hu(v);
      }
    }
  }

  int best_z = cz;
  std::size_t best_area = 0;
  for (int z = 0; z < d.nz; ++z) {
    const std::size_t a = out.truth.slice_area(z);
    if (a > best_area) best_area = a, best_z = z;
  }
  double sx = 0, sy = 0;
  const Mask2D m = out.truth.slice(best_z);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y)) sx += x, sy += y;
    }
  }
  out.seed = {best_z, static_cast<int>(std::lround(sx / best_area)), static_cast<int>(std::lround(sy / best_area))};
  return out;
}

std::string case_id_for(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%03d", index);
  return buf;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, path.string(), "cannot open manifest");
  const fs::path base = path.parent_path();
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::bad_header, "manifest", "empty manifest");
  const std::vector<std::string> expected{"case_id", "label", "seed_z", "seed_x", "seed_y", "volume_path",
                                          "truth_mask_path"};
  const auto header = split_csv(line);
  if (header != expected) throw Error(Errc::bad_header, "manifest", "unexpected manifest columns: " + line);
  std::vector<ManifestEntry> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != expected.size()) {
      throw Error(Errc::bad_header, "manifest", "line " + std::to_string(line_no) + ": expected 7 columns");
    }
    ManifestEntry e;
    e.case_id = cells[0];
    if (e.case_id.empty()) throw Error(Errc::bad_header, "case_id", "line " + std::to_string(line_no) + ": empty id");
    e.label = parse_int(cells[1], "label", line_no);
    if (e.label != 0 && e.label != 1) throw Error(Errc::bad_header, "label", "labels must be 0 or 1");
    const bool any_seed = !cells[2].empty() || !cells[3].empty() || !cells[4].empty();
    if (any_seed) {
      e.seed = Seed{parse_int(cells[2], "seed_z", line_no), parse_int(cells[3], "seed_x", line_no),
                    parse_int(cells[4], "seed_y", line_no)};
    }
    if (cells[5].empty()) throw Error(Errc::bad_header, "volume_path", "line " + std::to_string(line_no) + ": empty");
    e.volume_path = base / cells[5];
    if (!cells[6].empty()) e.truth_mask_path = base / cells[6];
    for (const auto& other : out) {
      if (other.case_id == e.case_id) throw Error(Errc::bad_header, "case_id", "duplicate case id " + e.case_id);
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const fs::path& path) {
  const fs::path base = path.parent_path();
  std::ostringstream out;
  out << "case_id,label,seed_z,seed_x,seed_y,volume_path,truth_mask_path\n";
  const auto rel = [&](const fs::path& p) {
    if (p.empty()) return std::string();
    return (p.is_absolute() ? p.lexically_relative(fs::absolute(base)) : p.lexically_relative(base)).generic_string();
  };
  for (const auto& e : entries) {
    out << e.case_id << ',' << e.label << ',';
    if (e.seed) {
      out << e.seed->z << ',' << e.seed->x << ',' << e.seed->y;
    } else {
      out << ",,";
    }
    out << ',' << rel(e.volume_path) << ',' << rel(e.truth_mask_path) << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::io_failure, path.string(), "cannot write manifest");
  f << out.str();
  if (!f) throw Error(Errc::io_failure, path.string(), "write failed");
}

fs::path generate_dataset(const PhantomSpec& spec, int n_pm, int n_non, std::uint64_t seed, const fs::path& out_dir) {
  validate(spec);
  if (n_pm < 1 || n_non < 1) throw Error(Errc::invalid_argument, "counts", "both class counts must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir / "volumes", ec);
  fs::create_directories(out_dir / "truth", ec);
  if (ec) throw Error(Errc::io_failure, out_dir.string(), "cannot create dataset directories: " + ec.message());

  const int n = n_pm + n_non;
  std::vector<ManifestEntry> entries(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const std::string id = case_id_for(static_cast<int>(i));
    const int label = static_cast<int>(i) < n_pm ? 1 : 0;
    const PhantomCase c = generate_case(spec, label, derive_seed(seed, i), id);
    ManifestEntry& e = entries[i];
    e.case_id = id;
    e.label = label;
    e.seed = c.seed;
    e.volume_path = out_dir / "volumes" / (id + ".ptv");
    e.truth_mask_path = out_dir / "truth" / (id + ".ptm");
    save_volume(c.volume, e.volume_path);
    save_mask(c.truth, e.truth_mask_path);
  });
  const fs::path manifest = out_dir / "manifest.csv";
  write_manifest(entries, manifest);
  return manifest;
}

}  // namespace pmcad
