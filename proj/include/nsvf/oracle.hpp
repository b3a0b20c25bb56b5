#pragma once

#include "nsvf/dataset.hpp"
#include "nsvf/geometry.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nsvf {

struct OracleSphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Vec3 albedo = Vec3::Constant(0.8);
};

struct OracleBox {
  Aabb box;
  Vec3 albedo = Vec3::Constant(0.8);
};

/// Diffuse spheres and axis-aligned boxes under one directional light plus
/// ambient, on a constant background.
struct OracleScene {
  std::vector<OracleSphere> spheres;
  std::vector<OracleBox> boxes;
  Vec3 light_direction = Vec3(0.4, -0.3, 1.0).normalized();  // towards the light
  double ambient = 0.3;
  Vec3 background = Vec3::Ones();
  Aabb bbox{Vec3::Constant(-1.0), Vec3::Constant(1.0)};
};

/// Built-in scenes: "sphere", "sphere_box", "empty". Throws InvalidArgument otherwise.
OracleScene builtin_scene(const std::string& name);

struct OracleHit {
  double distance = 0.0;
  Vec3 normal = Vec3::Zero();  // outward unit normal
  Vec3 albedo = Vec3::Zero();
};

/// Nearest primitive hit with distance > 0.
std::optional<OracleHit> trace(const OracleScene& scene, const Ray& ray);

/// Lambert shading of a hit, or the background on a miss.
Vec3 shade(const OracleScene& scene, const std::optional<OracleHit>& hit);

struct OracleDatasetOptions {
  int n_train = 30;
  int n_test = 10;
  int resolution = 64;
  double camera_distance = 3.2;
  double fov_degrees = 50.0;
  double min_elevation_degrees = 10.0;
  double max_elevation_degrees = 80.0;
  double z_max = 10.0;  // depth written for background pixels
};

/// Cameras uniformly on the upper (+z) hemisphere band, looking at the bbox
/// center; exact depth rasters included. Throws when resolution < 16.
std::pair<PosedImageSet, PosedImageSet> generate_oracle_dataset(const OracleScene& scene,
                                                                const OracleDatasetOptions& options,
                                                                std::mt19937_64& rng);

/// Renders one view of the scene with the oracle.
PosedImage render_oracle_view(const OracleScene& scene, const Camera& camera, double z_max);

}  // namespace nsvf
