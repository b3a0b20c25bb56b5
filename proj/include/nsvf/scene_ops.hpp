#pragma once

#include "nsvf/checkpoint.hpp"
#include "nsvf/field.hpp"
#include "nsvf/renderer.hpp"
#include "nsvf/voxel_grid.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace nsvf {

/// A voxel field placed in the world. Grid, table and network are immutable and
/// may be shared between instances (clones share their source's table).
struct FieldInstance {
  std::shared_ptr<const SparseVoxelGrid> grid;
  std::shared_ptr<const EmbeddingTable> table;
  std::shared_ptr<const FieldNetwork> network;
  Vec3 background = Vec3::Ones();
  RigidTransform transform;  // local -> world
  int scene = 0;

  void validate() const;
};

FieldInstance make_instance(VoxelField field, std::shared_ptr<const FieldNetwork> network,
                            const Vec3& background = Vec3::Ones(), const RigidTransform& transform = {},
                            int scene = 0);

struct CompositeScene {
  std::vector<FieldInstance> instances;
  Vec3 background = Vec3::Ones();
  double step_size = 0.0;  // tau used by render_composite

  void validate() const;
};

/// Instances of a checkpoint over its (shared) network; background from the
/// first instance.
CompositeScene composite_from_checkpoint(const Checkpoint& ckpt);
/// Writes instances back, copying shared tables. Every instance must use the
/// same network object.
Checkpoint checkpoint_from_composite(const CompositeScene& scene, const nlohmann::json& metadata = {});

/// Cells whose centers lie in `region` (closed box, grid-local coordinates).
std::vector<int> select_voxels(const SparseVoxelGrid& grid, const Aabb& region);
/// Same, with the region given in world coordinates for a placed instance.
std::vector<int> select_voxels(const FieldInstance& instance, const Aabb& world_region);

/// Removes cells (ids into grid). Orphaned corners are dropped; surviving
/// values are unchanged. Throws InvalidArgument on an unknown id.
VoxelField delete_voxels(const SparseVoxelGrid& grid, const EmbeddingTable& table, const std::vector<int>& cells);
/// Instance version; the result owns a compacted copy of the table.
FieldInstance delete_voxels(const FieldInstance& instance, const std::vector<int>& cells);

/// New instance restricted to `cells`, sharing the table and network, placed
/// at transform * instance.transform.
FieldInstance clone_voxels(const FieldInstance& instance, const std::vector<int>& cells,
                           const RigidTransform& transform);

/// Hits of every instance along a world ray, tagged by instance index and
/// sorted by (z_in, instance, voxel). Distances are world distances.
std::vector<VoxelHit> composite_hits(const CompositeScene& scene, const Ray& world_ray);

/// One ray through the composite in a single front-to-back pass.
PixelResult render_composite_ray(const CompositeScene& scene, const Ray& world_ray, const RenderConfig& cfg,
                                 std::mt19937_64* rng = nullptr);

/// cfg.step_size is replaced by scene.step_size when the latter is positive.
RenderedImage render_composite(const CompositeScene& scene, const Camera& camera, RenderConfig cfg,
                               std::uint64_t seed = 0);
RenderedImage render_composite_serial(const CompositeScene& scene, const Camera& camera, RenderConfig cfg,
                                      std::uint64_t seed = 0);

}  // namespace nsvf
