#include "nsvf/renderer.hpp"

namespace nsvf {

NormalMap normal_map(const Raster& depth, const Raster& transparency, const Camera& camera,
                     double background_threshold) {
  validate_camera(camera);
  if (depth.width != camera.width || depth.height != camera.height || transparency.width != depth.width ||
      transparency.height != depth.height)
    throw InvalidArgument("normal_map: raster size does not match the camera");

  const int w = depth.width, h = depth.height;
  NormalMap out;
  out.visualization = Image(w, h);
  out.normals.assign(static_cast<std::size_t>(w) * h, Vec3::Zero());
  out.valid.assign(static_cast<std::size_t>(w) * h, false);

  const auto point = [&](int x, int y) {
    const Ray r = pixel_ray(camera, x + 0.5, y + 0.5);
    return r.at(depth.at(x, y));
  };
  const auto background = [&](int x, int y) { return transparency.at(x, y) > background_threshold; };

  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (background(x, y) || background(x - 1, y) || background(x + 1, y) || background(x, y - 1) ||
          background(x, y + 1))
        continue;
      const Vec3 dx = point(x + 1, y) - point(x - 1, y);
      const Vec3 dy = point(x, y + 1) - point(x, y - 1);
      Vec3 n = dx.cross(dy);
      const double len = n.norm();
      if (!(len > 0.0)) continue;
      n /= len;
      if (n.dot(pixel_ray(camera, x + 0.5, y + 0.5).direction) > 0.0) n = -n;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      out.normals[i] = n;
      out.valid[i] = true;
      out.visualization.set(x, y, 0.5 * (n + Vec3::Ones()));
    }
  }
  return out;
}

}  // namespace nsvf
