#include "nsvf/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace nsvf {
namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

constexpr char kRasterMagic[8] = {'N', 'S', 'V', 'F', 'R', 'A', 'S', 'T'};

std::uint8_t to_byte(float v) {
  const float c = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

Image::Image(int w, int h, const Vec3& fill) : Image(w, h) {
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) set(x, y, fill);
}

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0) throw InvalidArgument("write_png: empty image");
  std::vector<std::uint8_t> bytes(image.data.size());
  std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);

  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw IoError("write_png: " + path.string() + ": " + png.message);
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw IoError("read_png: " + path.string() + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("read_png: " + path.string() + ": " + png.message);
  }
  Image image(static_cast<int>(png.width), static_cast<int>(png.height));
  std::transform(bytes.begin(), bytes.end(), image.data.begin(), [](std::uint8_t b) { return b / 255.0f; });
  return image;
}

void write_raster(const Raster& raster, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_raster: cannot open " + path.string());
  const auto w = static_cast<std::uint32_t>(raster.width), h = static_cast<std::uint32_t>(raster.height);
  out.write(kRasterMagic, sizeof(kRasterMagic));
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(raster.data.data()),
            static_cast<std::streamsize>(raster.data.size() * sizeof(float)));
  if (!out) throw IoError("write_raster: write failed for " + path.string());
}

Raster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_raster: cannot open " + path.string());
  char magic[8];
  std::uint32_t w = 0, h = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(magic, kRasterMagic, 8) != 0) throw IoError("read_raster: bad header in " + path.string());
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16))
    throw IoError("read_raster: implausible size in " + path.string());
  Raster raster(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(raster.data.data()), static_cast<std::streamsize>(raster.data.size() * sizeof(float)));
  if (!in) throw IoError("read_raster: truncated " + path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("read_raster: trailing bytes in " + path.string());
  return raster;
}

}  // namespace nsvf
