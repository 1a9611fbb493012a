#include <fstream>
#include <set>

#include "pmcad/app.hpp"
#include "pmcad/phantom.hpp"
#include "pmcad/volume_io.hpp"
#include "support.hpp"

using namespace pmcad;

namespace {

PhantomSpec flat_spec() {
  PhantomSpec s;
  s.noise_std[0] = s.noise_std[1] = 0;
  s.smoothing_sigma[0] = s.smoothing_sigma[1] = 0;
  s.global_noise_std = 0;
  return s;
}

}  // namespace

TEST_CASE("noise-free phantom is two-valued and truth is the lesion value") {
  for (int label : {0, 1}) {
    const PhantomCase c = generate_case(flat_spec(), label, 5 + label, "flat");
    CHECK(c.label == label);
    std::set<int> values(c.volume.voxels.begin(), c.volume.voxels.end());
    CHECK(values == std::set<int>{40, 120});
    for (std::size_t i = 0; i < c.volume.voxels.size(); ++i) CHECK((c.volume.voxels[i] == 40) == (c.truth.bits[i] == 1));
    // suggested seed sits in the truth on its largest slice
    std::size_t best = 0;
    for (int z = 0; z < c.truth.dims.nz; ++z) best = std::max(best, c.truth.slice_area(z));
    CHECK(c.truth.slice_area(c.seed.z) == best);
    CHECK(c.truth.slice(c.seed.z).at(c.seed.x, c.seed.y) == 1);
  }
}

TEST_CASE("default phantom: lesion mean near the lesion level") {
  const PhantomSpec spec;
  for (int label : {0, 1})
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const PhantomCase c = generate_case(spec, label, seed);
      double sum = 0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < c.volume.voxels.size(); ++i)
        if (c.truth.bits[i]) sum += c.volume.voxels[i], ++n;
      CHECK(n > 0);
      CHECK(std::fabs(sum / n - spec.lesion_hu) <= 5.0);
    }
}

TEST_CASE("generation is deterministic per case seed") {
  const PhantomSpec spec;
  const PhantomCase a = generate_case(spec, 1, 99, "x"), b = generate_case(spec, 1, 99, "x");
  CHECK(a.volume == b.volume);
  CHECK(a.truth == b.truth);
  CHECK(a.seed.z == b.seed.z);
  CHECK(generate_case(spec, 1, 100, "x").volume != a.volume);
}

TEST_CASE("texture classes differ in in-lesion roughness") {
  const PhantomSpec spec;
  auto roughness = [&](int label, std::uint64_t seed) {
    const PhantomCase c = generate_case(spec, label, seed);
    double s = 0;
    int n = 0;
    for (int z = 0; z < c.volume.dims.nz; ++z) {
      const Mask2D t = c.truth.slice(z);
      for (int y = 0; y < c.volume.dims.ny; ++y)
        for (int x = 0; x + 1 < c.volume.dims.nx; ++x)
          if (t.at(x, y) && t.at(x + 1, y)) {
            const double d = c.volume.at(x + 1, y, z) - c.volume.at(x, y, z);
            s += d * d;
            ++n;
          }
    }
    return s / n;
  };
  for (std::uint64_t seed = 0; seed < 3; ++seed) CHECK(roughness(1, seed) > 2 * roughness(0, seed));
}

TEST_CASE("phantom parameter validation") {
  PhantomSpec s;
  CHECK_NOTHROW(validate(s));
  s.radius_x = 40;
  CHECK_ERRC(validate(s), Errc::out_of_range);
  s = {};
  // radius + jitter + margin must stay inside
  s.dims.nz = 12;
  s.radius_z = 4.5;
  CHECK_ERRC(validate(s), Errc::out_of_range);
  s = {};
  s.noise_std[1] = -1;
  CHECK_ERRC(validate(s), Errc::invalid_argument);
  s = {};
  s.spacing_mm.sy = 0;
  CHECK_ERRC(validate(s), Errc::invalid_spacing);
  CHECK_ERRC(generate_case(PhantomSpec{}, 2, 0), Errc::invalid_argument);
  const auto j = to_json(PhantomSpec{});
  CHECK(to_json(phantom_spec_from_json(j)) == j);
}

TEST_CASE("dataset of 30 + 10 with a round-tripping manifest") {
  testing::TempDir dir("phantom");
  PhantomSpec spec;
  spec.dims = {40, 40, 16};
  spec.radius_x = 8;
  spec.radius_y = 7;
  spec.radius_z = 2.5;
  const auto manifest = generate_dataset(spec, 30, 10, 7, dir.path());
  const auto entries = read_manifest(manifest);
  REQUIRE(entries.size() == 40);
  int pm = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    pm += e.label;
    CHECK(e.label == (i < 30 ? 1 : 0));
    CHECK(std::filesystem::exists(e.volume_path));
    CHECK(std::filesystem::exists(e.truth_mask_path));
    REQUIRE(e.seed.has_value());
    const CtVolume v = load_volume(e.volume_path);
    CHECK(v.case_id == e.case_id);
    CHECK(load_mask(e.truth_mask_path).slice(e.seed->z).at(e.seed->x, e.seed->y) == 1);
  }
  CHECK(pm == 30);
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir.path() / "volumes")) files += f.is_regular_file();
  CHECK(files == 40);

  // rewrite and reread: identical entries
  write_manifest(entries, dir.path() / "copy.csv");
  const auto again = read_manifest(dir.path() / "copy.csv");
  REQUIRE(again.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(again[i].case_id == entries[i].case_id);
    CHECK(again[i].volume_path == entries[i].volume_path);
    CHECK(again[i].seed->x == entries[i].seed->x);
  }

  // same seed, same bytes
  testing::TempDir dir2("phantom");
  generate_dataset(spec, 30, 10, 7, dir2.path());
  CHECK(read_file(dir.path() / "volumes" / (entries[3].case_id + ".ptv")) ==
        read_file(dir2.path() / "volumes" / (entries[3].case_id + ".ptv")));
  CHECK_ERRC(generate_dataset(spec, 0, 10, 7, dir2.path()), Errc::invalid_argument);
}

TEST_CASE("manifest parse errors") {
  testing::TempDir dir("phantom");
  const auto p = dir.path() / "m.csv";
  CHECK_ERRC(read_manifest(p), Errc::missing_file);
  std::ofstream(p) << "case_id,label\n";
  CHECK_ERRC(read_manifest(p), Errc::bad_header);
  std::ofstream(p) << "case_id,label,seed_z,seed_x,seed_y,volume_path,truth_mask_path\nA,3,1,1,1,v.ptv,\n";
  CHECK_ERRC(read_manifest(p), Errc::bad_header);
  std::ofstream(p) << "case_id,label,seed_z,seed_x,seed_y,volume_path,truth_mask_path\nA,1,,,,v.ptv,\n";
  const auto e = read_manifest(p);
  REQUIRE(e.size() == 1);
  CHECK(!e[0].seed.has_value());
  CHECK(e[0].volume_path == dir.path() / "v.ptv");
}

TEST_CASE("truth-mask features separate the classes") {
  PhantomSpec spec;
  spec.dims = {48, 48, 16};
  spec.radius_x = 9;
  spec.radius_y = 8;
  spec.radius_z = 2.5;
  Matrix x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const int label = i < 30;
    const PhantomCase c = generate_case(spec, label, derive_seed(3, i));
    x.append_row(case_features(c.volume, c.truth, FeatureMode::features_3d));
    y.push_back(label);
  }
  int separating = 0;
  for (std::size_t f = 0; f < x.cols; ++f) {
    double m[2] = {0, 0}, v[2] = {0, 0};
    int n[2] = {0, 0};
    for (std::size_t r = 0; r < x.rows; ++r) m[y[r]] += x(r, f), ++n[y[r]];
    for (int c : {0, 1}) m[c] /= n[c];
    for (std::size_t r = 0; r < x.rows; ++r) v[y[r]] += (x(r, f) - m[y[r]]) * (x(r, f) - m[y[r]]);
    const double pooled = std::sqrt((v[0] + v[1]) / (n[0] + n[1] - 2));
    if (pooled > 0 && std::fabs(m[1] - m[0]) > pooled) ++separating;
  }
  CHECK(separating >= 1);
}
