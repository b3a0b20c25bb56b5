#include "nsvf/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace nsvf {
namespace fs = std::filesystem;
namespace {

std::string frame_name(std::size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu%s", i, ext);
  return buf;
}

std::vector<double> read_numbers(const fs::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw MalformedFileError("cannot open " + path.string());
  std::vector<double> values;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw MalformedFileError(path.string() + ": not a number: '" + token + "'");
    }
  }
  if (values.size() != expected)
    throw MalformedFileError(path.string() + ": expected " + std::to_string(expected) + " numbers, found " +
                             std::to_string(values.size()));
  return values;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

PosedImageSet load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  const fs::path intr_path = dir / "intrinsics.txt";
  if (!fs::exists(intr_path)) throw MissingIntrinsicsError("missing intrinsics file: " + intr_path.string());
  const auto intr = read_numbers(intr_path, 5);
  const fs::path bbox_path = dir / "bbox.txt";
  if (!fs::exists(bbox_path)) throw MalformedFileError("missing bbox file: " + bbox_path.string());
  const auto bb = read_numbers(bbox_path, 6);

  PosedImageSet set;
  set.bbox = Aabb{Vec3(bb[0], bb[1], bb[2]), Vec3(bb[3], bb[4], bb[5])};
  if (!(set.bbox.volume() > 0.0)) throw MalformedFileError(bbox_path.string() + ": bbox has no volume");
  const int width = static_cast<int>(intr[3]), height = static_cast<int>(intr[4]);
  if (width != intr[3] || height != intr[4] || width <= 0 || height <= 0)
    throw MalformedFileError(intr_path.string() + ": width and height must be positive integers");

  std::vector<fs::path> images;
  if (fs::is_directory(dir / "images"))
    for (const auto& e : fs::directory_iterator(dir / "images"))
      if (e.is_regular_file() && e.path().extension() == ".png") images.push_back(e.path());
  std::sort(images.begin(), images.end());

  for (const fs::path& img_path : images) {
    const std::string stem = img_path.stem().string();
    const fs::path pose_path = dir / "poses" / (stem + ".txt");
    if (!fs::exists(pose_path)) throw MissingPoseError("missing pose for image " + img_path.string());
    const auto m = read_numbers(pose_path, 16);
    if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0)
      throw MalformedFileError(pose_path.string() + ": last row must be 0 0 0 1");

    PosedImage view;
    view.camera.focal = intr[0];
    view.camera.cx = intr[1];
    view.camera.cy = intr[2];
    view.camera.width = width;
    view.camera.height = height;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) view.camera.rotation(r, c) = m[static_cast<std::size_t>(4 * r + c)];
      view.camera.translation[r] = m[static_cast<std::size_t>(4 * r + 3)];
    }
    try {
      validate_camera(view.camera);
    } catch (const InvalidArgument& e) {
      throw MalformedFileError(pose_path.string() + ": " + e.what());
    }
    view.image = read_png(img_path);
    if (view.image.width != width || view.image.height != height)
      throw DimensionMismatchError(img_path.string() + ": image is " + std::to_string(view.image.width) + "x" +
                                   std::to_string(view.image.height) + ", intrinsics say " + std::to_string(width) +
                                   "x" + std::to_string(height));
    const fs::path depth_path = dir / "depths" / (stem + ".raw");
    if (fs::exists(depth_path)) {
      view.depth = read_raster(depth_path);
      if (view.depth->width != width || view.depth->height != height)
        throw DimensionMismatchError(depth_path.string() + ": depth raster size differs from the image");
    }
    set.views.push_back(std::move(view));
  }
  return set;
}

void save_dataset(const PosedImageSet& set, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "poses");
  if (set.views.empty()) throw InvalidArgument("save_dataset: no views");
  const Camera& first = set.views.front().camera;
  bool any_depth = false;
  for (const PosedImage& v : set.views) {
    const Camera& c = v.camera;
    if (c.focal != first.focal || c.cx != first.cx || c.cy != first.cy || c.width != first.width ||
        c.height != first.height)
      throw InvalidArgument("save_dataset: views must share intrinsics");
    if (v.image.width != c.width || v.image.height != c.height)
      throw InvalidArgument("save_dataset: image size differs from camera");
    any_depth |= v.depth.has_value();
  }
  if (any_depth) fs::create_directories(dir / "depths");
  write_text(dir / "intrinsics.txt", fmt(first.focal) + " " + fmt(first.cx) + " " + fmt(first.cy) + " " +
                                         std::to_string(first.width) + " " + std::to_string(first.height) + "\n");
  const Aabb& b = set.bbox;
  write_text(dir / "bbox.txt", fmt(b.min.x()) + " " + fmt(b.min.y()) + " " + fmt(b.min.z()) + " " + fmt(b.max.x()) +
                                   " " + fmt(b.max.y()) + " " + fmt(b.max.z()) + "\n");
  for (std::size_t i = 0; i < set.views.size(); ++i) {
    const PosedImage& v = set.views[i];
    write_png(v.image, dir / "images" / frame_name(i, ".png"));
    std::string pose;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose += fmt(v.camera.rotation(r, c)) + " ";
      pose += fmt(v.camera.translation[r]) + "\n";
    }
    pose += "0 0 0 1\n";
    write_text(dir / "poses" / frame_name(i, ".txt"), pose);
    if (v.depth) write_raster(*v.depth, dir / "depths" / frame_name(i, ".raw"));
  }
}

std::uint64_t hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ull;
  };
  for (const fs::path& f : files) {
    for (char c : fs::relative(f, dir).generic_string()) mix(static_cast<unsigned char>(c));
    mix(0);
    std::ifstream in(f, std::ios::binary);
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
      for (std::streamsize i = 0; i < in.gcount(); ++i) mix(static_cast<unsigned char>(buf[i]));
    }
  }
  return h;
}

}  // namespace nsvf
