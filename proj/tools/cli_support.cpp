#include "cli_support.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace fs = std::filesystem;

namespace nsvf::cli {

double report_psnr(double psnr) { return std::min(psnr, kPsnrSentinel); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  j["code_version"] = code_version;
  j["dataset_hashes"] = dataset_hashes;
  j["outputs"] = outputs;
  return j;
}

void RunManifest::write(const fs::path& path) const { write_json(to_json(), path); }

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

void prepare_output_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir)) throw IoError("output path exists and is not a directory: " + dir.string());
    if (!fs::is_empty(dir) && !force)
      throw ConfigError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

DatasetDirs locate_splits(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  DatasetDirs d;
  if (fs::is_directory(dir / "train")) {
    d.train = dir / "train";
    if (fs::is_directory(dir / "test")) d.test = dir / "test";
  } else {
    d.train = dir;
  }
  return d;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

double focal_from_fov(int resolution, double fov_deg) {
  return 0.5 * resolution / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
}

std::vector<Camera> orbit_cameras(const Vec3& center, double distance, double elevation_deg, int count, int resolution,
                                  double fov_deg) {
  if (count < 1) throw ConfigError("orbit needs at least one pose");
  if (!(distance > 0.0)) throw ConfigError("orbit distance must be > 0");
  if (resolution < 1) throw ConfigError("resolution must be >= 1");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("fov must be in (0, 180) degrees");
  const double el = elevation_deg * std::numbers::pi / 180.0;
  std::vector<Camera> cams;
  for (int i = 0; i < count; ++i) {
    const double az = 2.0 * std::numbers::pi * i / count;
    const Vec3 eye = center + distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    cams.push_back(look_at(eye, center, Vec3(0, 0, 1), focal_from_fov(resolution, fov_deg), resolution, resolution));
  }
  return cams;
}

Aabb composite_bounds(const CompositeScene& scene) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const FieldInstance& inst : scene.instances) {
    if (inst.grid->empty()) continue;
    const Aabb b = inst.grid->bounds();
    for (int k = 0; k < 8; ++k) {
      const Vec3 c((k & 1) ? b.max.x() : b.min.x(), (k & 2) ? b.max.y() : b.min.y(), (k & 4) ? b.max.z() : b.min.z());
      const Vec3 w = inst.transform.apply_point(c);
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
  }
  if (!lo.allFinite()) return {Vec3::Constant(-1.0), Vec3::Constant(1.0)};
  return {lo, hi};
}

RigidTransform parse_transform(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> v;
  double x = 0.0;
  while (in >> x) v.push_back(x);
  if (!in.eof() || (v.size() != 3 && v.size() != 6))
    throw ConfigError("transform must be 'tx ty tz' or 'tx ty tz rx ry rz', got '" + text + "'");
  const Vec3 t(v[0], v[1], v[2]);
  const Vec3 r = v.size() == 6 ? Vec3(v[3], v[4], v[5]) : Vec3::Zero();
  return RigidTransform::from_euler_degrees(r, t);
}

}  // namespace nsvf::cli
