#include "nsvf/dataset.hpp"
#include "nsvf/oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace nsvf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nsvf_test_" + name);
  fs::remove_all(p);
  return p;
}

PosedImageSet small_set(int n, int res, std::uint64_t seed) {
  OracleDatasetOptions o;
  o.n_train = n;
  o.n_test = 0;
  o.resolution = res;
  std::mt19937_64 rng(seed);
  return generate_oracle_dataset(builtin_scene("sphere_box"), o, rng).first;
}

}  // namespace

TEST_CASE("dataset: save/load round trip within 8-bit quantization") {
  const PosedImageSet set = small_set(3, 16, 1);
  const fs::path dir = scratch("roundtrip");
  save_dataset(set, dir);
  const PosedImageSet back = load_dataset(dir);
  REQUIRE(back.views.size() == 3);
  CHECK(back.bbox.min == set.bbox.min);
  CHECK(back.bbox.max == set.bbox.max);
  for (std::size_t v = 0; v < 3; ++v) {
    const PosedImage& a = set.views[v];
    const PosedImage& b = back.views[v];
    for (std::size_t i = 0; i < a.image.data.size(); ++i)
      CHECK(std::abs(a.image.data[i] - b.image.data[i]) <= 0.5f / 255.0f + 1e-6f);
    CHECK(b.camera.focal == a.camera.focal);
    CHECK(b.camera.width == a.camera.width);
    CHECK((b.camera.rotation - a.camera.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.camera.translation - a.camera.translation).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(b.depth.has_value());
    CHECK(*b.depth == *a.depth);
  }
  CHECK(hash_directory(dir) == hash_directory(dir));
  fs::remove_all(dir);
}

TEST_CASE("dataset: documented errors") {
  const PosedImageSet set = small_set(2, 16, 2);
  const fs::path dir = scratch("errors");

  save_dataset(set, dir);
  fs::remove(dir / "intrinsics.txt");
  CHECK_THROWS_AS(load_dataset(dir), MissingIntrinsicsError);

  save_dataset(set, dir);
  fs::remove(dir / "poses/0001.txt");
  CHECK_THROWS_AS(load_dataset(dir), MissingPoseError);

  save_dataset(set, dir);
  std::ofstream(dir / "poses/0001.txt") << "1 0 0\n0 1 zero\n";
  CHECK_THROWS_AS(load_dataset(dir), MalformedFileError);

  save_dataset(set, dir);
  write_png(Image(20, 16), dir / "images/0001.png");
  CHECK_THROWS_AS(load_dataset(dir), DimensionMismatchError);

  CHECK_THROWS_AS(load_dataset(dir / "nope"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("raster and png files") {
  const fs::path dir = scratch("raster");
  fs::create_directories(dir);
  Raster r(5, 3);
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = 0.25f * static_cast<float>(i) - 1.0f;
  write_raster(r, dir / "r.raw");
  CHECK(read_raster(dir / "r.raw") == r);
  CHECK(fs::file_size(dir / "r.raw") == 16 + 4 * 15);

  Image img(4, 2, Vec3(0.2, 1.5, -0.1));
  write_png(img, dir / "i.png");
  const Image back = read_png(dir / "i.png");
  CHECK(back.pixel(3, 1).x() == doctest::Approx(51.0 / 255.0));
  CHECK(back.pixel(3, 1).y() == 1.0);
  CHECK(back.pixel(3, 1).z() == 0.0);
  CHECK_THROWS_AS(read_png(dir / "missing.png"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("oracle: empty scene, determinism, resolution check") {
  OracleDatasetOptions o;
  o.n_train = 2;
  o.n_test = 1;
  o.resolution = 16;
  std::mt19937_64 rng(5);
  const auto [train, test] = generate_oracle_dataset(builtin_scene("empty"), o, rng);
  for (const PosedImageSet* s : {&train, &test})
    for (const PosedImage& v : s->views) {
      CHECK(v.image == Image(16, 16, Vec3::Ones()));
      CHECK(*v.depth == Raster(16, 16, static_cast<float>(o.z_max)));
    }

  std::mt19937_64 r1(8), r2(8);
  const auto a = generate_oracle_dataset(builtin_scene("sphere_box"), o, r1);
  const auto b = generate_oracle_dataset(builtin_scene("sphere_box"), o, r2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.first.views[i].image == b.first.views[i].image);
    CHECK(*a.first.views[i].depth == *b.first.views[i].depth);
  }
  o.resolution = 8;
  CHECK_THROWS_AS(generate_oracle_dataset(builtin_scene("sphere"), o, r1), InvalidArgument);
  CHECK_THROWS_AS(builtin_scene("teapot"), InvalidArgument);
}

TEST_CASE("oracle: cameras on the upper hemisphere band look at the center") {
  OracleDatasetOptions o;
  o.n_train = 20;
  o.n_test = 5;
  o.resolution = 16;
  std::mt19937_64 rng(3);
  const auto [train, test] = generate_oracle_dataset(builtin_scene("sphere"), o, rng);
  for (const PosedImageSet* s : {&train, &test})
    for (const PosedImage& v : s->views) {
      const Vec3 c = v.camera.center();
      CHECK(c.norm() == doctest::Approx(o.camera_distance));
      const double elev = std::asin(c.z() / c.norm()) * 180.0 / std::numbers::pi;
      CHECK(elev >= o.min_elevation_degrees - 1e-9);
      CHECK(elev <= o.max_elevation_degrees + 1e-9);
      CHECK((v.camera.optical_axis() + c.normalized()).norm() < 1e-12);
    }
}

TEST_CASE("oracle: centered sphere silhouette radius") {
  const OracleScene scene = builtin_scene("sphere");
  const double dist = 3.2, r = scene.spheres[0].radius;
  const int res = 64;
  const double focal = 0.5 * res / std::tan(25.0 * std::numbers::pi / 180.0);
  const Camera cam = look_at(Vec3(0.0, -dist, 0.0), Vec3::Zero(), Vec3::UnitZ(), focal, res, res);
  const PosedImage view = render_oracle_view(scene, cam, 10.0);
  // Tangent cone half-angle asin(r / d) projects to radius f tan(asin(r / d)).
  const double radius = focal * std::tan(std::asin(r / dist));
  int checked = 0;
  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const double rho = std::hypot(x + 0.5 - cam.cx, y + 0.5 - cam.cy);
      const bool fg = view.depth->at(x, y) < 10.0f;
      if (rho < radius - 1.0) CHECK(fg);
      if (rho > radius + 1.0) CHECK(!fg);
      checked += std::abs(rho - radius) > 1.0;
    }
  CHECK(checked > res * res / 2);
}

TEST_CASE("oracle: depth back-projects onto primitive surfaces") {
  const OracleScene scene = builtin_scene("sphere_box");
  const PosedImageSet set = small_set(3, 32, 6);
  const OracleSphere& s = scene.spheres[0];
  const Aabb& box = scene.boxes[0].box;
  int surface = 0;
  for (const PosedImage& v : set.views)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        const double z = v.depth->at(x, y);
        if (z >= 10.0) continue;
        const Ray ray = pixel_ray(v.camera, x + 0.5, y + 0.5);
        const Vec3 p = ray.at(z);
        const double on_sphere = std::abs((p - s.center).norm() - s.radius);
        const Vec3 d = (p - box.center()).cwiseAbs() - 0.5 * (box.max - box.min);
        const double on_box = d.maxCoeff() <= 1e-6 ? std::abs(d.maxCoeff()) : 1.0;
        CHECK(std::min(on_sphere, on_box) < 1e-6);
        ++surface;
      }
  CHECK(surface > 100);
}
