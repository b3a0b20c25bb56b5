#include "nsvf/checkpoint.hpp"

#include "nsvf/image.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace nsvf {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'N', 'S', 'V', 'F', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeader = 8 + 1 + 4;

using nlohmann::json;

template <typename T>
void put(std::vector<std::uint8_t>& out, const T* data, std::size_t count) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + count * sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t pos, std::size_t end) : bytes_(bytes), pos_(pos), end_(end) {}

  template <typename T>
  void get(T* data, std::size_t count) {
    const std::size_t n = count * sizeof(T);
    if (n > end_ - pos_) throw CheckpointFormatError("checkpoint: payload shorter than the manifest declares");
    std::memcpy(data, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_;
  std::size_t end_;
};

json network_config_json(const FieldConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"feature_freqs", c.feature_freqs},
          {"direction_freqs", c.direction_freqs},
          {"hidden", c.hidden},
          {"density_layers", c.density_layers},
          {"color_layers", c.color_layers},
          {"hidden_activation", c.hidden_activation == Activation::kRelu ? "relu" : "softplus"}};
}

FieldConfig network_config_from(const json& j) {
  FieldConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.feature_freqs = j.at("feature_freqs").get<int>();
  c.direction_freqs = j.at("direction_freqs").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.density_layers = j.at("density_layers").get<int>();
  c.color_layers = j.at("color_layers").get<int>();
  const std::string act = j.at("hidden_activation").get<std::string>();
  if (act == "relu")
    c.hidden_activation = Activation::kRelu;
  else if (act == "softplus")
    c.hidden_activation = Activation::kSoftplus;
  else
    throw CheckpointFormatError("checkpoint: unknown activation '" + act + "'");
  return c;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw CheckpointFormatError("checkpoint: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["step_size"] = ckpt.step_size;
  manifest["metadata"] = ckpt.metadata;
  if (ckpt.network.num_parameters() > 0) {
    manifest["network"] = {{"config", network_config_json(ckpt.network.config())},
                           {"parameters", ckpt.network.num_parameters()}};
  } else {
    manifest["network"] = nullptr;
  }
  json instances = json::array();
  for (const InstanceRecord& inst : ckpt.instances) {
    const SparseVoxelGrid& g = inst.field.grid;
    const EmbeddingTable& t = inst.field.table;
    if (t.rows() != g.num_corners()) throw InvalidArgument("save_checkpoint: table rows do not match grid corners");
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(inst.transform.rotation(r, c));
    instances.push_back({{"level", g.level()},
                         {"voxel_size", g.voxel_size()},
                         {"origin", vec_json(g.origin())},
                         {"embed_dim", t.dim()},
                         {"cells", g.num_cells()},
                         {"corners", g.num_corners()},
                         {"rotation", rot},
                         {"translation", vec_json(inst.transform.translation)},
                         {"background", vec_json(inst.background)},
                         {"scene", inst.scene}});
  }
  manifest["instances"] = instances;
  const std::string text = manifest.dump(1);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  out.push_back(kCheckpointVersion);
  const auto len = static_cast<std::uint32_t>(text.size());
  put(out, &len, 1);
  out.insert(out.end(), text.begin(), text.end());
  for (const InstanceRecord& inst : ckpt.instances) {
    const SparseVoxelGrid& g = inst.field.grid;
    static_assert(sizeof(CellCoord) == 12);
    put(out, g.cells().data(), g.num_cells());
    put(out, g.corners().data(), g.num_corners());
    put(out, inst.field.table.data().data(), inst.field.table.data().size());
  }
  put(out, ckpt.network.parameters().data(), ckpt.network.num_parameters());
  const auto crc = static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
  put(out, &crc, 1);
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw CheckpointFormatError("checkpoint: not a checkpoint file (bad magic)");
  if (bytes.size() >= 9 && bytes[8] != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint: unsupported format version " + std::to_string(bytes[8]) +
                                 " (expected " + std::to_string(kCheckpointVersion) + ")");
  if (bytes.size() < kHeader + 4) throw CheckpointChecksumError("checkpoint: file truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 4);
  const auto crc = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body)));
  if (crc != stored) throw CheckpointChecksumError("checkpoint: checksum mismatch (file corrupt or truncated)");

  std::uint32_t len = 0;
  std::memcpy(&len, bytes.data() + 9, 4);
  if (len > body - kHeader) throw CheckpointFormatError("checkpoint: manifest length exceeds file size");
  json manifest;
  try {
    manifest = json::parse(bytes.begin() + kHeader, bytes.begin() + static_cast<std::ptrdiff_t>(kHeader + len));
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint: malformed manifest: ") + e.what());
  }

  Checkpoint ckpt;
  Reader reader(bytes, kHeader + len, body);
  try {
    if (manifest.at("format_version").get<int>() != kCheckpointVersion)
      throw CheckpointVersionError("checkpoint: manifest version mismatch");
    ckpt.step_size = manifest.at("step_size").get<double>();
    ckpt.metadata = manifest.at("metadata");
    for (const json& ij : manifest.at("instances")) {
      InstanceRecord inst;
      const auto n_cells = ij.at("cells").get<std::size_t>();
      const auto n_corners = ij.at("corners").get<std::size_t>();
      const int dim = ij.at("embed_dim").get<int>();
      if (dim < 0) throw CheckpointFormatError("checkpoint: negative embedding dim");
      if ((n_cells + n_corners) * 12 > body) throw CheckpointFormatError("checkpoint: counts exceed file size");
      std::vector<CellCoord> cells(n_cells), corners(n_corners);
      reader.get(cells.data(), n_cells);
      reader.get(corners.data(), n_corners);
      EmbeddingTable table(n_corners, dim);
      reader.get(table.data().data(), table.data().size());
      try {
        inst.field.grid = SparseVoxelGrid(ij.at("voxel_size").get<double>(), vec_from(ij.at("origin")),
                                          ij.at("level").get<int>(), std::move(cells), std::move(corners));
      } catch (const InvalidArgument& e) {
        throw CheckpointFormatError(std::string("checkpoint: inconsistent grid: ") + e.what());
      }
      inst.field.table = std::move(table);
      const json& rot = ij.at("rotation");
      if (!rot.is_array() || rot.size() != 9) throw CheckpointFormatError("checkpoint: rotation needs 9 values");
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) inst.transform.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)].get<double>();
      inst.transform.translation = vec_from(ij.at("translation"));
      inst.background = vec_from(ij.at("background"));
      inst.scene = ij.at("scene").get<int>();
      ckpt.instances.push_back(std::move(inst));
    }
    const json& nj = manifest.at("network");
    if (!nj.is_null()) {
      try {
        ckpt.network = FieldNetwork(network_config_from(nj.at("config")));
      } catch (const InvalidArgument& e) {
        throw CheckpointFormatError(std::string("checkpoint: invalid network config: ") + e.what());
      }
      if (nj.at("parameters").get<std::size_t>() != ckpt.network.num_parameters())
        throw CheckpointFormatError("checkpoint: parameter count does not match the network config");
      reader.get(ckpt.network.parameters().data(), ckpt.network.num_parameters());
    }
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("checkpoint: malformed manifest: ") + e.what());
  }
  if (!reader.done()) throw CheckpointFormatError("checkpoint: trailing payload bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void save_field(const SparseVoxelGrid& grid, const EmbeddingTable& table, const std::filesystem::path& path) {
  Checkpoint c;
  c.instances.push_back({{grid, table}, {}, Vec3::Zero(), 0});
  save_checkpoint(c, path);
}

VoxelField load_field(const std::filesystem::path& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.instances.size() != 1) throw CheckpointFormatError("load_field: expected exactly one field");
  return std::move(c.instances.front().field);
}

}  // namespace nsvf
