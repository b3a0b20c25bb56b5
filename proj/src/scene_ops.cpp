#include "nsvf/scene_ops.hpp"

#include <algorithm>
#include <numeric>

namespace nsvf {
namespace {

Ray to_local(const RigidTransform& local_to_world, const Ray& world) { return local_to_world.inverse().apply(world); }

RenderConfig effective(const CompositeScene& scene, RenderConfig cfg) {
  if (scene.step_size > 0.0) cfg.step_size = scene.step_size;
  cfg.validate();
  return cfg;
}

PixelRenderer composite_renderer(const CompositeScene& scene, const RenderConfig& cfg) {
  return [&scene, cfg](const Ray& ray, std::mt19937_64& rng) {
    return render_composite_ray(scene, ray, cfg, cfg.jitter ? &rng : nullptr);
  };
}

}  // namespace

void FieldInstance::validate() const {
  if (!grid || !table || !network) throw InvalidArgument("FieldInstance: grid, table and network are required");
  if (table->rows() < grid->num_corners())
    throw InvalidArgument("FieldInstance: table has fewer rows than the grid has corners");
  if (table->dim() != network->config().embed_dim)
    throw InvalidArgument("FieldInstance: embedding dimension differs from the network");
  if (!is_rotation(transform.rotation) || !transform.translation.allFinite())
    throw InvalidArgument("FieldInstance: transform is not rigid");
}

FieldInstance make_instance(VoxelField field, std::shared_ptr<const FieldNetwork> network, const Vec3& background,
                            const RigidTransform& transform, int scene) {
  FieldInstance inst;
  inst.grid = std::make_shared<const SparseVoxelGrid>(std::move(field.grid));
  inst.table = std::make_shared<const EmbeddingTable>(std::move(field.table));
  inst.network = std::move(network);
  inst.background = background;
  inst.transform = transform;
  inst.scene = scene;
  inst.validate();
  return inst;
}

void CompositeScene::validate() const {
  if (instances.empty()) throw InvalidArgument("CompositeScene: no instances");
  for (const FieldInstance& i : instances) i.validate();
}

CompositeScene composite_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.instances.empty()) throw InvalidArgument("composite_from_checkpoint: checkpoint has no instances");
  if (ckpt.network.num_parameters() == 0) throw InvalidArgument("composite_from_checkpoint: checkpoint has no network");
  auto net = std::make_shared<const FieldNetwork>(ckpt.network);
  CompositeScene scene;
  for (const InstanceRecord& r : ckpt.instances)
    scene.instances.push_back(make_instance(r.field, net, r.background, r.transform, r.scene));
  scene.background = ckpt.instances.front().background;
  scene.step_size = ckpt.step_size;
  return scene;
}

Checkpoint checkpoint_from_composite(const CompositeScene& scene, const nlohmann::json& metadata) {
  scene.validate();
  Checkpoint ckpt;
  for (const FieldInstance& i : scene.instances) {
    if (i.network != scene.instances.front().network)
      throw InvalidArgument("checkpoint_from_composite: instances use different networks");
    InstanceRecord r;
    if (i.table->rows() == i.grid->num_corners()) {
      r.field = {*i.grid, *i.table};
    } else {
      // A clone over a shared table: keep only the rows this grid references.
      r.field = keep_cells(*i.grid, *i.table, std::vector<bool>(i.grid->num_cells(), true)).field;
    }
    r.transform = i.transform;
    r.background = i.background;
    r.scene = i.scene;
    ckpt.instances.push_back(std::move(r));
  }
  ckpt.network = *scene.instances.front().network;
  ckpt.step_size = scene.step_size;
  ckpt.metadata = metadata.is_null() ? nlohmann::json::object() : metadata;
  return ckpt;
}

std::vector<int> select_voxels(const SparseVoxelGrid& grid, const Aabb& region) {
  std::vector<int> out;
  for (std::size_t i = 0; i < grid.num_cells(); ++i) {
    const Aabb b = grid.cell_box(static_cast<int>(i));
    const Vec3 c = 0.5 * (b.min + b.max);
    if ((c.array() >= region.min.array()).all() && (c.array() <= region.max.array()).all())
      out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> select_voxels(const FieldInstance& instance, const Aabb& world_region) {
  instance.validate();
  std::vector<int> out;
  for (std::size_t i = 0; i < instance.grid->num_cells(); ++i) {
    const Aabb b = instance.grid->cell_box(static_cast<int>(i));
    const Vec3 c = instance.transform.apply_point(0.5 * (b.min + b.max));
    if ((c.array() >= world_region.min.array()).all() && (c.array() <= world_region.max.array()).all())
      out.push_back(static_cast<int>(i));
  }
  return out;
}

VoxelField delete_voxels(const SparseVoxelGrid& grid, const EmbeddingTable& table, const std::vector<int>& cells) {
  std::vector<bool> keep(grid.num_cells(), true);
  for (int id : cells) {
    if (id < 0 || static_cast<std::size_t>(id) >= grid.num_cells())
      throw InvalidArgument("delete_voxels: unknown cell id " + std::to_string(id));
    keep[static_cast<std::size_t>(id)] = false;
  }
  return keep_cells(grid, table, keep).field;
}

FieldInstance delete_voxels(const FieldInstance& instance, const std::vector<int>& cells) {
  instance.validate();
  FieldInstance out = instance;
  VoxelField f = delete_voxels(*instance.grid, *instance.table, cells);
  out.grid = std::make_shared<const SparseVoxelGrid>(std::move(f.grid));
  out.table = std::make_shared<const EmbeddingTable>(std::move(f.table));
  return out;
}

FieldInstance clone_voxels(const FieldInstance& instance, const std::vector<int>& cells,
                           const RigidTransform& transform) {
  instance.validate();
  if (!is_rotation(transform.rotation) || !transform.translation.allFinite())
    throw InvalidArgument("clone_voxels: transform is not rigid");
  const SparseVoxelGrid& g = *instance.grid;
  std::vector<CellCoord> subset;
  subset.reserve(cells.size());
  for (int id : cells) {
    if (id < 0 || static_cast<std::size_t>(id) >= g.num_cells())
      throw InvalidArgument("clone_voxels: unknown cell id " + std::to_string(id));
    subset.push_back(g.cell(id));
  }
  FieldInstance out = instance;
  // Same corner list, so rows still index the shared table.
  out.grid = std::make_shared<const SparseVoxelGrid>(g.voxel_size(), g.origin(), g.level(), std::move(subset),
                                                     std::vector<CellCoord>(g.corners().begin(), g.corners().end()));
  out.transform = transform * instance.transform;
  return out;
}

std::vector<VoxelHit> composite_hits(const CompositeScene& scene, const Ray& world_ray) {
  std::vector<VoxelHit> all, hits;
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    const FieldInstance& inst = scene.instances[i];
    intersect_grid(to_local(inst.transform, world_ray), *inst.grid, hits);
    for (VoxelHit h : hits) {
      h.instance = static_cast<int>(i);
      all.push_back(h);
    }
  }
  std::sort(all.begin(), all.end(), [](const VoxelHit& a, const VoxelHit& b) {
    if (a.z_in != b.z_in) return a.z_in < b.z_in;
    if (a.instance != b.instance) return a.instance < b.instance;
    return a.voxel_id < b.voxel_id;
  });
  return all;
}

PixelResult render_composite_ray(const CompositeScene& scene, const Ray& world_ray, const RenderConfig& cfg,
                                 std::mt19937_64* rng) {
  const std::vector<VoxelHit> hits = composite_hits(scene, world_ray);
  const std::vector<RaySample> samples = sample_ray(hits, cfg, rng);

  std::vector<Ray> local(scene.instances.size());
  for (std::size_t i = 0; i < scene.instances.size(); ++i) local[i] = to_local(scene.instances[i].transform, world_ray);

  std::vector<FieldPoint> points;
  Eigen::VectorXd part_sigma;
  Eigen::MatrixXd part_color;
  const ChunkEvaluator eval = [&](std::span<const RaySample> chunk, Eigen::VectorXd& sigma, Eigen::MatrixXd& color) {
    const auto n = static_cast<Eigen::Index>(chunk.size());
    sigma.resize(n);
    color.resize(3, n);
    // Runs of consecutive samples from the same instance share one batched query.
    for (std::size_t begin = 0; begin < chunk.size();) {
      const int k = chunk[begin].instance;
      std::size_t end = begin;
      while (end < chunk.size() && chunk[end].instance == k) ++end;
      const FieldInstance& inst = scene.instances[static_cast<std::size_t>(k)];
      const Ray& r = local[static_cast<std::size_t>(k)];
      points.resize(end - begin);
      for (std::size_t j = begin; j < end; ++j)
        points[j - begin] = {chunk[j].voxel, inst.grid->local_coords(chunk[j].voxel, r.at(chunk[j].z_mid))};
      evaluate_field(*inst.grid, *inst.table, *inst.network, points, r.direction, part_sigma, part_color, nullptr);
      const auto b = static_cast<Eigen::Index>(begin), len = static_cast<Eigen::Index>(end - begin);
      sigma.segment(b, len) = part_sigma;
      color.middleCols(b, len) = part_color;
      begin = end;
    }
  };
  const MarchResult m = march(samples, eval, cfg.early_stop_eps, scene.background, cfg.z_max);
  return {m.color, m.depth, m.transparency, m.eval_count};
}

RenderedImage render_composite(const CompositeScene& scene, const Camera& camera, RenderConfig cfg,
                               std::uint64_t seed) {
  scene.validate();
  cfg = effective(scene, cfg);
  return render_pixels(camera, composite_renderer(scene, cfg), seed);
}

RenderedImage render_composite_serial(const CompositeScene& scene, const Camera& camera, RenderConfig cfg,
                                      std::uint64_t seed) {
  scene.validate();
  cfg = effective(scene, cfg);
  return render_pixels_serial(camera, composite_renderer(scene, cfg), seed);
}

}  // namespace nsvf
