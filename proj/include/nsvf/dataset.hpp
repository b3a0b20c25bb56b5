#pragma once

#include "nsvf/geometry.hpp"
#include "nsvf/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace nsvf {

struct PosedImage {
  Image image;
  Camera camera;
  std::optional<Raster> depth;  // distance along the unit ray
};

/// Images sharing one set of intrinsics, plus the scene bounding box.
struct PosedImageSet {
  std::vector<PosedImage> views;
  Aabb bbox;
};

class DatasetError : public IoError {
 public:
  using IoError::IoError;
};
class MissingIntrinsicsError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class MissingPoseError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class MalformedFileError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class DimensionMismatchError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

/// Directory layout:
///   intrinsics.txt   focal cx cy width height
///   bbox.txt         min_x min_y min_z max_x max_y max_z
///   images/NNNN.png  RGB
///   poses/NNNN.txt   4x4 camera-to-world, row-major
///   depths/NNNN.raw  optional float raster (see write_raster)
PosedImageSet load_dataset(const std::filesystem::path& dir);
void save_dataset(const PosedImageSet& set, const std::filesystem::path& dir);

/// FNV-1a over the relative paths and contents of every regular file under dir.
std::uint64_t hash_directory(const std::filesystem::path& dir);

}  // namespace nsvf
