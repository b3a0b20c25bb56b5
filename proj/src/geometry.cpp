#include "nsvf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nsvf {

Ray make_ray(const Vec3& origin, const Vec3& direction) {
  const double n = direction.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw InvalidArgument("make_ray: direction must be finite and nonzero");
  return {origin, direction / n};
}

double Aabb::volume() const {
  const Vec3 e = extent();
  return std::max(0.0, e.x()) * std::max(0.0, e.y()) * std::max(0.0, e.z());
}

bool Aabb::contains(const Vec3& p) const {
  return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
}

std::optional<Interval> intersect_aabb(const Ray& ray, const Aabb& box) {
  if (!((box.max.array() > box.min.array()).all())) return std::nullopt;
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.direction[a];
    if (d == 0.0) {
      if (o < box.min[a] || o > box.max[a]) return std::nullopt;
      continue;
    }
    double tn = (box.min[a] - o) / d;
    double tf = (box.max[a] - o) / d;
    if (tn > tf) std::swap(tn, tf);
    t0 = std::max(t0, tn);
    t1 = std::min(t1, tf);
  }
  if (!(t0 < t1)) return std::nullopt;
  return Interval{t0, t1};
}

RigidTransform RigidTransform::from_euler_degrees(const Vec3& degrees, const Vec3& translation) {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  const Mat3 rx = Eigen::AngleAxisd(degrees.x() * kDeg, Vec3::UnitX()).toRotationMatrix();
  const Mat3 ry = Eigen::AngleAxisd(degrees.y() * kDeg, Vec3::UnitY()).toRotationMatrix();
  const Mat3 rz = Eigen::AngleAxisd(degrees.z() * kDeg, Vec3::UnitZ()).toRotationMatrix();
  return {rz * ry * rx, translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

bool is_rotation(const Mat3& m, double tol) {
  if (!m.allFinite()) return false;
  if (((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

void validate_camera(const Camera& camera) {
  if (!(camera.focal > 0.0) || !std::isfinite(camera.focal))
    throw InvalidArgument("camera: focal must be positive");
  if (camera.width <= 0 || camera.height <= 0) throw InvalidArgument("camera: image size must be positive");
  if (!is_rotation(camera.rotation)) throw InvalidArgument("camera: rotation is not orthonormal");
  if (!camera.translation.allFinite()) throw InvalidArgument("camera: translation is not finite");
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
               int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.focal = focal;
  cam.width = width;
  cam.height = height;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  return cam;
}

Ray pixel_ray(const Camera& camera, double px, double py) {
  if (!(px >= 0.0 && px < camera.width && py >= 0.0 && py < camera.height))
    throw InvalidArgument("pixel_ray: pixel (" + std::to_string(px) + ", " + std::to_string(py) +
                          ") outside the image");
  const Vec3 local((px - camera.cx) / camera.focal, (py - camera.cy) / camera.focal, 1.0);
  return {camera.translation, (camera.rotation * local).normalized()};
}

Vec2 project_direction(const Camera& camera, const Vec3& direction) {
  const Vec3 local = camera.rotation.transpose() * direction;
  if (!(local.z() > 0.0)) throw InvalidArgument("project_direction: direction points behind the camera");
  return {camera.cx + camera.focal * local.x() / local.z(), camera.cy + camera.focal * local.y() / local.z()};
}

}  // namespace nsvf
