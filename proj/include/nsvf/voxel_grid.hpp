#pragma once

#include "nsvf/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

namespace nsvf {

/// Occupied cells of a regular lattice plus the shared-corner table.
///
/// Cell (i, j, k) spans origin + [i, i+1] * voxel_size (per axis). Corners are
/// keyed by integer lattice coordinates at the grid's level, so two cells that
/// touch resolve the touching corners to the same row.
class SparseVoxelGrid {
 public:
  SparseVoxelGrid() = default;

  /// Corner rows are assigned in order of first appearance over the sorted cells.
  SparseVoxelGrid(double voxel_size, const Vec3& origin, int level, std::vector<CellCoord> cells);

  /// Explicit corner order (row r is corners[r]). Every cell corner must be listed.
  SparseVoxelGrid(double voxel_size, const Vec3& origin, int level, std::vector<CellCoord> cells,
                  std::vector<CellCoord> corners);

  double voxel_size() const { return voxel_size_; }
  const Vec3& origin() const { return origin_; }
  int level() const { return level_; }
  bool empty() const { return cells_.empty(); }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_corners() const { return corners_.size(); }

  std::span<const CellCoord> cells() const { return cells_; }
  std::span<const CellCoord> corners() const { return corners_; }
  const CellCoord& cell(int id) const { return cells_[static_cast<std::size_t>(id)]; }
  const std::array<std::int32_t, 8>& cell_corners(int id) const {
    return cell_corner_rows_[static_cast<std::size_t>(id)];
  }

  /// Cell id, or -1 when the cell is not occupied.
  int find_cell(const CellCoord& c) const;
  /// Row of a lattice corner, or -1.
  std::int32_t find_corner(const CellCoord& c) const;

  Aabb cell_box(int id) const;
  Aabb cell_box(const CellCoord& c) const;
  Vec3 corner_position(const CellCoord& corner) const;
  /// Box around all occupied cells; zero box when empty.
  Aabb bounds() const;
  const CellCoord& min_cell() const { return min_cell_; }
  const CellCoord& max_cell() const { return max_cell_; }

  /// Occupied cell containing p (points on shared faces resolve to any
  /// occupied neighbour), or nullopt.
  std::optional<int> locate(const Vec3& p) const;
  /// Position of p relative to cell `id`, in [0,1]^3 for points inside it.
  Vec3 local_coords(int id, const Vec3& p) const;

  friend bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b);

 private:
  void build_index(std::vector<CellCoord> corners, bool explicit_corners);
  std::int64_t dense_offset(const CellCoord& c) const;

  double voxel_size_ = 1.0;
  Vec3 origin_ = Vec3::Zero();
  int level_ = 0;
  std::vector<CellCoord> cells_;
  std::vector<CellCoord> corners_;
  std::vector<std::array<std::int32_t, 8>> cell_corner_rows_;
  std::unordered_map<std::uint64_t, std::int32_t> corner_index_;
  std::unordered_map<std::uint64_t, std::int32_t> cell_index_;
  // Dense cell lookup over the occupied bounding region when it is small enough.
  std::vector<std::int32_t> dense_cells_;
  CellCoord min_cell_{};
  CellCoord max_cell_{};
};

/// Per-corner learnable feature vectors, row-major [rows x dim].
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, int dim) : dim_(dim), data_(rows * static_cast<std::size_t>(dim), 0.0f) {}

  int dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / static_cast<std::size_t>(dim_); }
  std::span<float> row(std::size_t r) { return {data_.data() + r * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * dim_, static_cast<std::size_t>(dim_)};
  }
  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  /// Fills with N(0, stddev^2).
  void randomize(std::mt19937_64& rng, double stddev = 0.01);

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  int dim_ = 0;
  std::vector<float> data_;
};

/// Grid paired with its embeddings.
struct VoxelField {
  SparseVoxelGrid grid;
  EmbeddingTable table;
};

/// Tiles `bbox` with cubic voxels of size cbrt(volume / target_count).
/// Partial voxels on the far faces are kept, so the tiling covers the box.
SparseVoxelGrid init_from_bbox(const Aabb& bbox, int target_count = 1000);

/// Cells containing at least one point (floor((p - origin) / voxel_size)),
/// optionally dilated by one cell in all 26 directions.
SparseVoxelGrid init_from_points(std::span<const Vec3> points, double voxel_size, bool dilate = true,
                                 const Vec3& origin = Vec3::Zero());

/// Result of removing cells: new field plus old-row -> new-row map (-1 = dropped).
struct CompactedField {
  VoxelField field;
  std::vector<std::int32_t> row_map;
};

/// Keeps cells with keep[id] set; unreferenced corner rows are dropped and the
/// surviving rows keep their relative order and exact values.
CompactedField keep_cells(const SparseVoxelGrid& grid, const EmbeddingTable& table,
                          const std::vector<bool>& keep);

/// Result of subdividing: parent_row_map[old row] = row of the same corner after
/// subdivision. Rows not in the map are newly created corners.
struct SubdividedField {
  VoxelField field;
  std::vector<std::int32_t> parent_row_map;
};

/// Halves the voxel size: every cell becomes 8 children and every new corner is
/// the trilinear interpolation of its parent's 8 corner embeddings.
SubdividedField subdivide(const SparseVoxelGrid& grid, const EmbeddingTable& table);

}  // namespace nsvf
