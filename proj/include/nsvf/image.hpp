#pragma once

#include "nsvf/geometry.hpp"

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace nsvf {

/// Failure reading or writing a file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// RGB image, row-major, interleaved, values nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}
  Image(int w, int h, const Vec3& fill);

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  Vec3 pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, const Vec3& c) {
    const std::size_t i = index(x, y);
    data[i] = static_cast<float>(c.x());
    data[i + 1] = static_cast<float>(c.y());
    data[i + 2] = static_cast<float>(c.z());
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Single-channel float raster (depth, transparency, evaluation counts).
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Raster() = default;
  Raster(int w, int h, float fill = 0.0f) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// 8-bit RGB PNG; values are clamped to [0,1] and rounded.
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Float raster file, little-endian:
///   bytes 0-7   magic "NSVFRAST"
///   bytes 8-11  uint32 width
///   bytes 12-15 uint32 height
///   then width*height float32, row-major.
void write_raster(const Raster& raster, const std::filesystem::path& path);
Raster read_raster(const std::filesystem::path& path);

}  // namespace nsvf
