#include "nsvf/oracle.hpp"

#include <cmath>
#include <numbers>

namespace nsvf {
namespace {

std::optional<double> hit_sphere(const OracleSphere& s, const Ray& ray) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  // Stable form of the two roots.
  const double q = b > 0.0 ? -b - root : -b + root;
  double t0 = q, t1 = c / q;
  if (q == 0.0) t0 = t1 = 0.0;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > 0.0) return t0;
  if (t1 > 0.0) return t1;
  return std::nullopt;
}

Vec3 box_normal(const Aabb& box, const Vec3& p) {
  const Vec3 c = box.center();
  const Vec3 half = 0.5 * box.extent();
  int best = 0;
  double best_v = -1.0;
  for (int a = 0; a < 3; ++a) {
    const double v = std::abs(p[a] - c[a]) / half[a];
    if (v > best_v) {
      best_v = v;
      best = a;
    }
  }
  Vec3 n = Vec3::Zero();
  n[best] = p[best] > c[best] ? 1.0 : -1.0;
  return n;
}

}  // namespace

OracleScene builtin_scene(const std::string& name) {
  OracleScene scene;
  if (name == "empty") return scene;
  if (name == "sphere") {
    scene.spheres.push_back({Vec3::Zero(), 0.6, Vec3(0.85, 0.35, 0.25)});
    return scene;
  }
  if (name == "sphere_box") {
    scene.spheres.push_back({Vec3(0.35, 0.25, 0.1), 0.45, Vec3(0.85, 0.35, 0.25)});
    scene.boxes.push_back({Aabb{Vec3(-0.75, -0.7, -0.6), Vec3(-0.05, 0.0, 0.2)}, Vec3(0.25, 0.55, 0.85)});
    return scene;
  }
  throw InvalidArgument("unknown built-in scene '" + name + "' (expected sphere, sphere_box or empty)");
}

std::optional<OracleHit> trace(const OracleScene& scene, const Ray& ray) {
  std::optional<OracleHit> best;
  for (const OracleSphere& s : scene.spheres) {
    const auto t = hit_sphere(s, ray);
    if (t && (!best || *t < best->distance))
      best = OracleHit{*t, (ray.at(*t) - s.center).normalized(), s.albedo};
  }
  for (const OracleBox& b : scene.boxes) {
    const auto iv = intersect_aabb(ray, b.box);
    if (!iv) continue;
    const double t = iv->z_in > 0.0 ? iv->z_in : iv->z_out;
    if (!best || t < best->distance) best = OracleHit{t, box_normal(b.box, ray.at(t)), b.albedo};
  }
  return best;
}

Vec3 shade(const OracleScene& scene, const std::optional<OracleHit>& hit) {
  if (!hit) return scene.background;
  const double lambert = std::max(0.0, hit->normal.dot(scene.light_direction));
  return hit->albedo * (scene.ambient + (1.0 - scene.ambient) * lambert);
}

PosedImage render_oracle_view(const OracleScene& scene, const Camera& camera, double z_max) {
  validate_camera(camera);
  PosedImage view;
  view.camera = camera;
  view.image = Image(camera.width, camera.height);
  view.depth = Raster(camera.width, camera.height);
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = pixel_ray(camera, x + 0.5, y + 0.5);
      const auto hit = trace(scene, ray);
      view.image.set(x, y, shade(scene, hit));
      view.depth->at(x, y) = static_cast<float>(hit ? hit->distance : z_max);
    }
  return view;
}

std::pair<PosedImageSet, PosedImageSet> generate_oracle_dataset(const OracleScene& scene,
                                                                const OracleDatasetOptions& options,
                                                                std::mt19937_64& rng) {
  if (options.resolution < 16) throw InvalidArgument("generate_oracle_dataset: resolution must be >= 16");
  if (options.n_train < 0 || options.n_test < 0) throw InvalidArgument("generate_oracle_dataset: negative view count");
  const double deg = std::numbers::pi / 180.0;
  const double focal = 0.5 * options.resolution / std::tan(0.5 * options.fov_degrees * deg);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  // Uniform on the sphere band: z uniform between the elevation sines.
  std::uniform_real_distribution<double> height(std::sin(options.min_elevation_degrees * deg),
                                                std::sin(options.max_elevation_degrees * deg));
  const Vec3 target = scene.bbox.center();

  std::vector<Camera> cameras;
  for (int i = 0; i < options.n_train + options.n_test; ++i) {
    const double phi = azimuth(rng);
    const double z = height(rng);
    const double r = std::sqrt(1.0 - z * z);
    const Vec3 dir(r * std::cos(phi), r * std::sin(phi), z);
    cameras.push_back(look_at(target + options.camera_distance * dir, target, Vec3::UnitZ(), focal,
                              options.resolution, options.resolution));
  }

  std::pair<PosedImageSet, PosedImageSet> out;
  out.first.bbox = out.second.bbox = scene.bbox;
  out.first.views.resize(static_cast<std::size_t>(options.n_train));
  out.second.views.resize(static_cast<std::size_t>(options.n_test));
  const int total = options.n_train + options.n_test;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < total; ++i) {
    PosedImage view = render_oracle_view(scene, cameras[static_cast<std::size_t>(i)], options.z_max);
    if (i < options.n_train)
      out.first.views[static_cast<std::size_t>(i)] = std::move(view);
    else
      out.second.views[static_cast<std::size_t>(i - options.n_train)] = std::move(view);
  }
  return out;
}

}  // namespace nsvf
