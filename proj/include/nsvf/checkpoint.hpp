#pragma once

#include "nsvf/field.hpp"
#include "nsvf/geometry.hpp"
#include "nsvf/voxel_grid.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsvf {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Unknown format version byte.
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
/// CRC mismatch or truncated file.
class CheckpointChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
/// Bad magic, malformed manifest or inconsistent payload.
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// One voxel field placed in the world by a rigid transform (local -> world).
struct InstanceRecord {
  VoxelField field;
  RigidTransform transform;
  Vec3 background = Vec3::Zero();
  int scene = 0;
};

/// Everything a trained model needs: fields, the shared network, the current
/// marching step and free-form metadata.
struct Checkpoint {
  std::vector<InstanceRecord> instances;
  FieldNetwork network;  // zero parameters when absent
  double step_size = 0.0;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// Byte layout (little-endian):
///   magic "NSVFCKPT" (8 bytes), version (1 byte), manifest length n (uint32),
///   manifest (n bytes of JSON), then per instance: cells (int32 x,y,z each),
///   corners (int32 x,y,z each), embeddings (float32, rows x dim); then the
///   network parameters (float64); finally CRC-32 of all preceding bytes (uint32).
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Single grid + table convenience wrappers.
void save_field(const SparseVoxelGrid& grid, const EmbeddingTable& table, const std::filesystem::path& path);
VoxelField load_field(const std::filesystem::path& path);

}  // namespace nsvf
