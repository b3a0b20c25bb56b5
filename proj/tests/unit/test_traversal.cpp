#include "doctest.h"
#include "nsvf/traversal.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace nsvf;

TEST_CASE("intersect_grid: column along +x") {
  const SparseVoxelGrid g(0.25, Vec3(0, 0, 0), 0, {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  const auto hits = intersect_grid(make_ray({-1, 0.1, 0.2}, {1, 0, 0}), g);
  REQUIRE(hits.size() == 4);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].z_out - hits[i].z_in == doctest::Approx(0.25).epsilon(1e-12));
    if (i > 0) CHECK(std::abs(hits[i].z_in - hits[i - 1].z_out) < 1e-9);
  }
  CHECK(intersect_grid(make_ray({-1, 2, 0.2}, {1, 0, 0}), g).empty());
}

TEST_CASE("intersect_grid matches per-voxel brute force") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::vector<VoxelHit> hits;
  int nonempty = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const SparseVoxelGrid g = testing::random_grid(rng, 8, 0.3, 0.25, Vec3(-1, -1, -1));
    for (int i = 0; i < 250; ++i) {
      Vec3 dir = testing::random_unit(rng);
      if (i % 7 == 0) dir[i % 3] = 0.0;
      Vec3 origin(u(rng), u(rng), u(rng));
      if (i % 11 == 0) origin = Vec3(-1 + 0.25 * (i % 8), -1 + 0.25 * ((i / 8) % 8), -2);  // on lattice planes
      const Ray ray = make_ray(origin, dir);
      intersect_grid(ray, g, hits);
      const auto ref = testing::brute_force_hits(ray, g);
      REQUIRE(hits.size() == ref.size());
      nonempty += !hits.empty();
      for (std::size_t k = 0; k < hits.size(); ++k) {
        CHECK(hits[k].voxel_id == ref[k].voxel_id);
        CHECK(std::abs(hits[k].z_in - ref[k].z_in) <= 1e-9);
        CHECK(std::abs(hits[k].z_out - ref[k].z_out) <= 1e-9);
      }
    }
  }
  CHECK(nonempty > 1000);
}

TEST_CASE("intersect_grid: convex region gives one contiguous interval") {
  const SparseVoxelGrid g = init_from_bbox({{-1, -1, -1}, {1, 1, 1}}, 512);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const Vec3 origin = 4.0 * testing::random_unit(rng);
    const Vec3 target = 0.8 * testing::random_unit(rng);
    const auto hits = intersect_grid(make_ray(origin, target - origin), g);
    REQUIRE_FALSE(hits.empty());
    // Overlap-free coverage: a hit's entry is never past the furthest exit so far.
    double reach = hits.front().z_out;
    for (std::size_t k = 1; k < hits.size(); ++k) {
      CHECK(hits[k].z_in <= reach + 1e-9);
      reach = std::max(reach, hits[k].z_out);
      CHECK(hits[k].z_in >= hits[k - 1].z_in);
    }
  }
}

TEST_CASE("intersect_grid from inside the grid starts at zero") {
  const SparseVoxelGrid g = init_from_bbox({{-1, -1, -1}, {1, 1, 1}}, 8);
  const auto hits = intersect_grid(make_ray({0.3, 0.2, -0.5}, {0, 0, 1}), g);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].z_in == 0.0);
}
