#include "nsvf/prune.hpp"

#include <cmath>

namespace nsvf {
namespace {

constexpr int kChunk = 512;

void check_options(const PruneOptions& options) {
  if (options.samples_per_axis < 2) throw InvalidArgument("prune: samples_per_axis must be >= 2");
}

PruneResult finish(const SparseVoxelGrid& grid, const EmbeddingTable& table, std::vector<bool> kept) {
  PruneResult result;
  for (bool k : kept) result.removed += k ? 0 : 1;
  result.compacted = keep_cells(grid, table, kept);
  result.kept = std::move(kept);
  return result;
}

}  // namespace

bool voxel_survives(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net, int voxel,
                    const PruneOptions& options) {
  const int n = options.samples_per_axis;
  const int total = n * n * n;
  std::vector<FieldPoint> points;
  points.reserve(kChunk);
  Eigen::VectorXd sigma;
  for (int start = 0; start < total; start += kChunk) {
    points.clear();
    for (int s = start; s < std::min(total, start + kChunk); ++s) {
      const int i = s % n, j = (s / n) % n, k = s / (n * n);
      points.push_back({voxel, Vec3((i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n)});
    }
    evaluate_density(grid, table, net, points, sigma);
    for (Eigen::Index s = 0; s < sigma.size(); ++s)
      if (!(std::exp(-sigma(s)) > options.gamma)) return true;
  }
  return false;
}

PruneResult prune(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                  const PruneOptions& options) {
  check_options(options);
  const int n = static_cast<int>(grid.num_cells());
  std::vector<char> keep(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(dynamic, 4)
  for (int v = 0; v < n; ++v) keep[static_cast<std::size_t>(v)] = voxel_survives(grid, table, net, v, options) ? 1 : 0;
  return finish(grid, table, std::vector<bool>(keep.begin(), keep.end()));
}

PruneResult prune_serial(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                         const PruneOptions& options) {
  check_options(options);
  std::vector<bool> kept(grid.num_cells());
  for (std::size_t v = 0; v < grid.num_cells(); ++v) kept[v] = voxel_survives(grid, table, net, static_cast<int>(v), options);
  return finish(grid, table, std::move(kept));
}

}  // namespace nsvf
