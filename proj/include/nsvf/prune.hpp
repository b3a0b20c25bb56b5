#pragma once

#include "nsvf/field.hpp"
#include "nsvf/voxel_grid.hpp"

#include <vector>

namespace nsvf {

struct PruneOptions {
  int samples_per_axis = 16;  // G = samples_per_axis^3 cell-centered lattice points per voxel
  double gamma = 0.5;
};

struct PruneResult {
  CompactedField compacted;
  std::vector<bool> kept;  // per original cell
  std::size_t removed = 0;
};

/// Removes voxel V iff min over its lattice samples of exp(-sigma) > gamma.
/// Voxels are evaluated in parallel (OpenMP).
PruneResult prune(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                  const PruneOptions& options = {});

/// Single-threaded reference of prune(); identical output.
PruneResult prune_serial(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                         const PruneOptions& options = {});

/// Keep/remove decision for one voxel.
bool voxel_survives(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net, int voxel,
                    const PruneOptions& options);

}  // namespace nsvf
