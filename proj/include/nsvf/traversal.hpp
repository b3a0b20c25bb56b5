#pragma once

#include "nsvf/geometry.hpp"
#include "nsvf/voxel_grid.hpp"

#include <vector>

namespace nsvf {

/// One occupied voxel crossed by a ray. `instance` tags hits when several
/// fields are traversed together (scene composition); 0 otherwise.
struct VoxelHit {
  int voxel_id = 0;
  double z_in = 0.0;
  double z_out = 0.0;
  int instance = 0;
};

/// All occupied voxels the ray crosses, sorted by (z_in, voxel_id).
///
/// Cells are enumerated with a 3D-DDA walk from the grid entry point; each
/// candidate's distances come from intersect_aabb on that cell's box, so they
/// are identical to a per-voxel slab test. Grazing contacts are dropped.
std::vector<VoxelHit> intersect_grid(const Ray& ray, const SparseVoxelGrid& grid);

/// Appends to `out` instead of returning a new vector (hot path).
void intersect_grid(const Ray& ray, const SparseVoxelGrid& grid, std::vector<VoxelHit>& out);

}  // namespace nsvf
