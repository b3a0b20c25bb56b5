#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nsvf {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// p(z) = origin + z * direction, with a unit direction.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  Vec3 at(double z) const { return origin + z * direction; }
};

/// Builds a ray with a normalized direction. Throws on a zero direction.
Ray make_ray(const Vec3& origin, const Vec3& direction);

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double volume() const;
  bool contains(const Vec3& p) const;
};

/// Entry and exit distances of a ray through a box, z_in < z_out.
struct Interval {
  double z_in = 0.0;
  double z_out = 0.0;
};

/// Slab test. Distances are clipped to z >= 0; a ray starting inside the box
/// gets z_in = 0. Misses, boxes entirely behind the origin, grazing contacts
/// and zero-extent boxes all return nullopt.
std::optional<Interval> intersect_aabb(const Ray& ray, const Aabb& box);

/// Rotation + translation, x_out = rotation * x_in + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  /// Rotation from XYZ Euler angles in degrees (applied x, then y, then z).
  static RigidTransform from_euler_degrees(const Vec3& degrees, const Vec3& translation);

  Vec3 apply_point(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_vector(const Vec3& v) const { return rotation * v; }
  RigidTransform inverse() const;
  /// (a * b)(x) = a(b(x)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);
  Ray apply(const Ray& ray) const { return {apply_point(ray.origin), apply_vector(ray.direction)}; }
};

/// True when `m` is orthonormal with determinant +1 within `tol`.
bool is_rotation(const Mat3& m, double tol = 1e-6);

/// Pinhole camera. Camera frame: +x right, +y down, +z forward (optical axis).
/// `rotation` and `translation` map camera coordinates to world coordinates.
struct Camera {
  double focal = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return translation; }
  Vec3 optical_axis() const { return rotation.col(2); }
};

/// Throws InvalidArgument unless focal > 0, size positive and rotation orthonormal.
void validate_camera(const Camera& camera);

/// Camera at `eye` looking at `target`; `up` is the world up direction.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal, int width,
               int height);

/// Ray through sub-pixel position (px, py); pixel centers sit at integer + 0.5.
Ray pixel_ray(const Camera& camera, double px, double py);

/// Inverse of pixel_ray's back-projection: image position hit by a world direction.
Vec2 project_direction(const Camera& camera, const Vec3& direction);

/// Integer lattice coordinate of a voxel cell or a voxel corner.
struct CellCoord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  friend auto operator<=>(const CellCoord&, const CellCoord&) = default;
  CellCoord operator+(const CellCoord& o) const { return {x + o.x, y + o.y, z + o.z}; }
};

/// Offset of corner k (0..7) from its cell's min corner: bit 0 -> x, bit 1 -> y, bit 2 -> z.
constexpr CellCoord corner_offset(int k) { return {k & 1, (k >> 1) & 1, (k >> 2) & 1}; }

}  // namespace nsvf
