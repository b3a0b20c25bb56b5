#pragma once

#include "nsvf/checkpoint.hpp"
#include "nsvf/dataset.hpp"
#include "nsvf/geometry.hpp"
#include "nsvf/scene_ops.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsvf::cli {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kIo = 3, kNumeric = 4 };

/// Bad flag values or combinations detected after parsing.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reports cap PSNR here so identical images stay representable in JSON.
inline constexpr double kPsnrSentinel = 100.0;
double report_psnr(double psnr);

/// Provenance of one command invocation, written before the long work starts.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::string code_version;
  nlohmann::json dataset_hashes = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

std::string hex64(std::uint64_t v);

/// Creates `dir`; refuses a non-empty existing directory unless `force`.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// `dir/train` and `dir/test` when present, otherwise `dir` is the train split.
struct DatasetDirs {
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
};
DatasetDirs locate_splits(const std::filesystem::path& dir);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);

/// Cameras on a horizontal circle around `center`, elevated by `elevation_deg`,
/// looking at the center with +z up.
std::vector<Camera> orbit_cameras(const Vec3& center, double distance, double elevation_deg, int count, int resolution,
                                  double fov_deg);
double focal_from_fov(int resolution, double fov_deg);

/// World-space box around every instance.
Aabb composite_bounds(const CompositeScene& scene);

/// Parses "tx ty tz [rx ry rz]" (rotation in degrees).
RigidTransform parse_transform(const std::string& text);

}  // namespace nsvf::cli
