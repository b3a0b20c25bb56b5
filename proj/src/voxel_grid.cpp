#include "nsvf/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nsvf {
namespace {

constexpr std::int64_t kKeyBias = 1 << 20;
constexpr std::int64_t kDenseLimit = std::int64_t{1} << 24;

std::uint64_t pack(const CellCoord& c) {
  const auto ux = static_cast<std::uint64_t>(c.x + kKeyBias) & 0x1FFFFF;
  const auto uy = static_cast<std::uint64_t>(c.y + kKeyBias) & 0x1FFFFF;
  const auto uz = static_cast<std::uint64_t>(c.z + kKeyBias) & 0x1FFFFF;
  return ux | (uy << 21) | (uz << 42);
}

void check_coord_range(const CellCoord& c) {
  const auto ok = [](std::int32_t v) { return v > -kKeyBias && v < kKeyBias - 2; };
  if (!ok(c.x) || !ok(c.y) || !ok(c.z)) throw InvalidArgument("voxel grid: lattice coordinate out of range");
}

}  // namespace

SparseVoxelGrid::SparseVoxelGrid(double voxel_size, const Vec3& origin, int level, std::vector<CellCoord> cells)
    : voxel_size_(voxel_size), origin_(origin), level_(level), cells_(std::move(cells)) {
  build_index({}, false);
}

SparseVoxelGrid::SparseVoxelGrid(double voxel_size, const Vec3& origin, int level, std::vector<CellCoord> cells,
                                 std::vector<CellCoord> corners)
    : voxel_size_(voxel_size), origin_(origin), level_(level), cells_(std::move(cells)) {
  build_index(std::move(corners), true);
}

void SparseVoxelGrid::build_index(std::vector<CellCoord> corners, bool explicit_corners) {
  if (!(voxel_size_ > 0.0) || !std::isfinite(voxel_size_)) throw InvalidArgument("voxel grid: voxel_size must be > 0");
  if (!origin_.allFinite()) throw InvalidArgument("voxel grid: origin must be finite");
  std::sort(cells_.begin(), cells_.end());
  cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());

  cell_index_.clear();
  cell_index_.reserve(cells_.size() * 2);
  min_cell_ = max_cell_ = CellCoord{};
  if (!cells_.empty()) {
    min_cell_ = max_cell_ = cells_.front();
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const CellCoord& c = cells_[i];
    check_coord_range(c);
    cell_index_.emplace(pack(c), static_cast<std::int32_t>(i));
    min_cell_ = {std::min(min_cell_.x, c.x), std::min(min_cell_.y, c.y), std::min(min_cell_.z, c.z)};
    max_cell_ = {std::max(max_cell_.x, c.x), std::max(max_cell_.y, c.y), std::max(max_cell_.z, c.z)};
  }

  dense_cells_.clear();
  if (!cells_.empty()) {
    const std::int64_t nx = max_cell_.x - min_cell_.x + 1;
    const std::int64_t ny = max_cell_.y - min_cell_.y + 1;
    const std::int64_t nz = max_cell_.z - min_cell_.z + 1;
    if (nx * ny * nz <= kDenseLimit) {
      dense_cells_.assign(static_cast<std::size_t>(nx * ny * nz), -1);
      for (std::size_t i = 0; i < cells_.size(); ++i)
        dense_cells_[static_cast<std::size_t>(dense_offset(cells_[i]))] = static_cast<std::int32_t>(i);
    }
  }

  corner_index_.clear();
  if (explicit_corners) {
    corners_ = std::move(corners);
    corner_index_.reserve(corners_.size() * 2);
    for (std::size_t r = 0; r < corners_.size(); ++r) {
      if (!corner_index_.emplace(pack(corners_[r]), static_cast<std::int32_t>(r)).second)
        throw InvalidArgument("voxel grid: duplicate corner in corner list");
    }
  } else {
    corners_.clear();
    corner_index_.reserve(cells_.size() * 4);
  }

  cell_corner_rows_.assign(cells_.size(), {});
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    for (int k = 0; k < 8; ++k) {
      const CellCoord q = cells_[i] + corner_offset(k);
      const std::uint64_t key = pack(q);
      auto it = corner_index_.find(key);
      if (it == corner_index_.end()) {
        if (explicit_corners) throw InvalidArgument("voxel grid: cell corner missing from corner list");
        it = corner_index_.emplace(key, static_cast<std::int32_t>(corners_.size())).first;
        corners_.push_back(q);
      }
      cell_corner_rows_[i][static_cast<std::size_t>(k)] = it->second;
    }
  }
}

std::int64_t SparseVoxelGrid::dense_offset(const CellCoord& c) const {
  const std::int64_t nx = max_cell_.x - min_cell_.x + 1;
  const std::int64_t ny = max_cell_.y - min_cell_.y + 1;
  return (static_cast<std::int64_t>(c.z - min_cell_.z) * ny + (c.y - min_cell_.y)) * nx + (c.x - min_cell_.x);
}

int SparseVoxelGrid::find_cell(const CellCoord& c) const {
  if (cells_.empty()) return -1;
  if (c.x < min_cell_.x || c.y < min_cell_.y || c.z < min_cell_.z || c.x > max_cell_.x || c.y > max_cell_.y ||
      c.z > max_cell_.z)
    return -1;
  if (!dense_cells_.empty()) return dense_cells_[static_cast<std::size_t>(dense_offset(c))];
  const auto it = cell_index_.find(pack(c));
  return it == cell_index_.end() ? -1 : it->second;
}

std::int32_t SparseVoxelGrid::find_corner(const CellCoord& c) const {
  const auto it = corner_index_.find(pack(c));
  return it == corner_index_.end() ? -1 : it->second;
}

Vec3 SparseVoxelGrid::corner_position(const CellCoord& q) const {
  return {origin_.x() + q.x * voxel_size_, origin_.y() + q.y * voxel_size_, origin_.z() + q.z * voxel_size_};
}

Aabb SparseVoxelGrid::cell_box(const CellCoord& c) const {
  return {corner_position(c), corner_position(c + CellCoord{1, 1, 1})};
}

Aabb SparseVoxelGrid::cell_box(int id) const { return cell_box(cell(id)); }

Aabb SparseVoxelGrid::bounds() const {
  if (cells_.empty()) return {};
  return {corner_position(min_cell_), corner_position(max_cell_ + CellCoord{1, 1, 1})};
}

std::optional<int> SparseVoxelGrid::locate(const Vec3& p) const {
  const Vec3 u = (p - origin_) / voxel_size_;
  const CellCoord base{static_cast<std::int32_t>(std::floor(u.x())), static_cast<std::int32_t>(std::floor(u.y())),
                       static_cast<std::int32_t>(std::floor(u.z()))};
  if (const int id = find_cell(base); id >= 0) return id;
  // On a face/edge/corner the floor picks one side; try the neighbours that
  // share the boundary.
  for (int k = 1; k < 8; ++k) {
    const CellCoord off = corner_offset(k);
    CellCoord c = base;
    bool valid = true;
    for (int a = 0; a < 3; ++a) {
      if ((a == 0 ? off.x : a == 1 ? off.y : off.z) == 0) continue;
      const double frac = u[a] - std::floor(u[a]);
      if (frac != 0.0) {
        valid = false;
        break;
      }
      (a == 0 ? c.x : a == 1 ? c.y : c.z) -= 1;
    }
    if (!valid) continue;
    if (const int id = find_cell(c); id >= 0) return id;
  }
  return std::nullopt;
}

Vec3 SparseVoxelGrid::local_coords(int id, const Vec3& p) const {
  return (p - corner_position(cell(id))) / voxel_size_;
}

bool operator==(const SparseVoxelGrid& a, const SparseVoxelGrid& b) {
  return a.voxel_size_ == b.voxel_size_ && a.origin_ == b.origin_ && a.level_ == b.level_ && a.cells_ == b.cells_ &&
         a.corners_ == b.corners_;
}

void EmbeddingTable::randomize(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (float& v : data_) v = static_cast<float>(normal(rng));
}

SparseVoxelGrid init_from_bbox(const Aabb& bbox, int target_count) {
  if (target_count < 1) throw InvalidArgument("init_from_bbox: target_count must be >= 1");
  const double volume = bbox.volume();
  if (!(volume > 0.0) || !std::isfinite(volume)) throw InvalidArgument("init_from_bbox: bbox has no volume");
  const double l = std::cbrt(volume / target_count);
  const Vec3 e = bbox.extent();
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = std::max(1, static_cast<int>(std::ceil(e[a] / l - 1e-9)));
  std::vector<CellCoord> cells;
  cells.reserve(static_cast<std::size_t>(n[0]) * n[1] * n[2]);
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int k = 0; k < n[2]; ++k) cells.push_back({i, j, k});
  return SparseVoxelGrid(l, bbox.min, 0, std::move(cells));
}

SparseVoxelGrid init_from_points(std::span<const Vec3> points, double voxel_size, bool dilate, const Vec3& origin) {
  if (points.empty()) throw InvalidArgument("init_from_points: empty point set");
  if (!(voxel_size > 0.0)) throw InvalidArgument("init_from_points: voxel_size must be > 0");
  std::vector<CellCoord> cells;
  cells.reserve(points.size() * (dilate ? 27 : 1));
  for (const Vec3& p : points) {
    if (!p.allFinite()) throw InvalidArgument("init_from_points: non-finite point");
    const Vec3 u = (p - origin) / voxel_size;
    const CellCoord c{static_cast<std::int32_t>(std::floor(u.x())), static_cast<std::int32_t>(std::floor(u.y())),
                      static_cast<std::int32_t>(std::floor(u.z()))};
    if (!dilate) {
      cells.push_back(c);
      continue;
    }
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) cells.push_back(c + CellCoord{dx, dy, dz});
  }
  return SparseVoxelGrid(voxel_size, origin, 0, std::move(cells));
}

CompactedField keep_cells(const SparseVoxelGrid& grid, const EmbeddingTable& table, const std::vector<bool>& keep) {
  if (keep.size() != grid.num_cells()) throw InvalidArgument("keep_cells: mask size mismatch");
  if (table.rows() != grid.num_corners()) throw InvalidArgument("keep_cells: table/grid row mismatch");
  std::vector<CellCoord> cells;
  std::vector<bool> used(grid.num_corners(), false);
  for (std::size_t i = 0; i < grid.num_cells(); ++i) {
    if (!keep[i]) continue;
    cells.push_back(grid.cell(static_cast<int>(i)));
    for (std::int32_t r : grid.cell_corners(static_cast<int>(i))) used[static_cast<std::size_t>(r)] = true;
  }
  CompactedField out;
  out.row_map.assign(grid.num_corners(), -1);
  std::vector<CellCoord> corners;
  for (std::size_t r = 0; r < grid.num_corners(); ++r) {
    if (!used[r]) continue;
    out.row_map[r] = static_cast<std::int32_t>(corners.size());
    corners.push_back(grid.corners()[r]);
  }
  out.field.table = EmbeddingTable(corners.size(), table.dim());
  for (std::size_t r = 0; r < grid.num_corners(); ++r) {
    if (out.row_map[r] < 0) continue;
    const auto src = table.row(r);
    std::copy(src.begin(), src.end(), out.field.table.row(static_cast<std::size_t>(out.row_map[r])).begin());
  }
  out.field.grid = SparseVoxelGrid(grid.voxel_size(), grid.origin(), grid.level(), std::move(cells), std::move(corners));
  return out;
}

SubdividedField subdivide(const SparseVoxelGrid& grid, const EmbeddingTable& table) {
  if (table.rows() != grid.num_corners()) throw InvalidArgument("subdivide: table/grid row mismatch");
  std::vector<CellCoord> children;
  children.reserve(grid.num_cells() * 8);
  for (const CellCoord& c : grid.cells())
    for (int k = 0; k < 8; ++k) children.push_back(CellCoord{2 * c.x, 2 * c.y, 2 * c.z} + corner_offset(k));

  SubdividedField out;
  out.field.grid = SparseVoxelGrid(0.5 * grid.voxel_size(), grid.origin(), grid.level() + 1, std::move(children));
  const SparseVoxelGrid& fine = out.field.grid;
  const int d = table.dim();
  out.field.table = EmbeddingTable(fine.num_corners(), d);
  std::vector<bool> assigned(fine.num_corners(), false);
  std::vector<double> vx(static_cast<std::size_t>(d) * 4), vy(static_cast<std::size_t>(d) * 2);

  for (std::size_t p = 0; p < grid.num_cells(); ++p) {
    const CellCoord& parent = grid.cell(static_cast<int>(p));
    const auto& rows = grid.cell_corners(static_cast<int>(p));
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; b <= 2; ++b)
        for (int c = 0; c <= 2; ++c) {
          const CellCoord q{2 * parent.x + a, 2 * parent.y + b, 2 * parent.z + c};
          const std::int32_t row = fine.find_corner(q);
          if (assigned[static_cast<std::size_t>(row)]) continue;
          assigned[static_cast<std::size_t>(row)] = true;
          const double tx = 0.5 * a, ty = 0.5 * b, tz = 0.5 * c;
          // x, then y, then z; (1-t)*lo + t*hi is exact at t in {0, 1}.
          for (int yz = 0; yz < 4; ++yz) {
            const auto lo = table.row(static_cast<std::size_t>(rows[static_cast<std::size_t>(2 * yz)]));
            const auto hi = table.row(static_cast<std::size_t>(rows[static_cast<std::size_t>(2 * yz + 1)]));
            for (int j = 0; j < d; ++j) vx[static_cast<std::size_t>(yz * d + j)] = (1.0 - tx) * lo[j] + tx * hi[j];
          }
          for (int z = 0; z < 2; ++z)
            for (int j = 0; j < d; ++j)
              vy[static_cast<std::size_t>(z * d + j)] =
                  (1.0 - ty) * vx[static_cast<std::size_t>((2 * z) * d + j)] + ty * vx[static_cast<std::size_t>((2 * z + 1) * d + j)];
          auto dst = out.field.table.row(static_cast<std::size_t>(row));
          for (int j = 0; j < d; ++j)
            dst[j] = static_cast<float>((1.0 - tz) * vy[static_cast<std::size_t>(j)] + tz * vy[static_cast<std::size_t>(d + j)]);
        }
  }

  out.parent_row_map.assign(grid.num_corners(), -1);
  for (std::size_t r = 0; r < grid.num_corners(); ++r) {
    const CellCoord q = grid.corners()[r];
    out.parent_row_map[r] = fine.find_corner({2 * q.x, 2 * q.y, 2 * q.z});
  }
  return out;
}

}  // namespace nsvf
