#include "nsvf/traversal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nsvf {
namespace {

int& axis(CellCoord& c, int a) { return a == 0 ? c.x : a == 1 ? c.y : c.z; }
int axis(const CellCoord& c, int a) { return a == 0 ? c.x : a == 1 ? c.y : c.z; }

class Walker {
 public:
  Walker(const Ray& ray, const SparseVoxelGrid& grid, std::vector<VoxelHit>& out)
      : ray_(ray), grid_(grid), out_(out) {}

  void visit(const CellCoord& c) {
    const int id = grid_.find_cell(c);
    if (id < 0) return;
    if (const auto hit = intersect_aabb(ray_, grid_.cell_box(id))) out_.push_back({id, hit->z_in, hit->z_out, 0});
  }

  bool in_range(const CellCoord& c) const {
    const CellCoord& lo = grid_.min_cell();
    const CellCoord& hi = grid_.max_cell();
    return c.x >= lo.x && c.y >= lo.y && c.z >= lo.z && c.x <= hi.x && c.y <= hi.y && c.z <= hi.z;
  }

 private:
  const Ray& ray_;
  const SparseVoxelGrid& grid_;
  std::vector<VoxelHit>& out_;
};

}  // namespace

std::vector<VoxelHit> intersect_grid(const Ray& ray, const SparseVoxelGrid& grid) {
  std::vector<VoxelHit> hits;
  intersect_grid(ray, grid, hits);
  return hits;
}

void intersect_grid(const Ray& ray, const SparseVoxelGrid& grid, std::vector<VoxelHit>& out) {
  out.clear();
  if (grid.empty()) return;
  const auto span = intersect_aabb(ray, grid.bounds());
  if (!span) return;

  Walker walker(ray, grid, out);
  const double l = grid.voxel_size();
  const Vec3& o = grid.origin();
  const CellCoord& lo = grid.min_cell();
  const CellCoord& hi = grid.max_cell();

  const Vec3 entry = (ray.at(span->z_in) - o) / l;
  CellCoord cell;
  for (int a = 0; a < 3; ++a) {
    const int v = static_cast<int>(std::floor(entry[a]));
    axis(cell, a) = std::clamp(v, axis(lo, a), axis(hi, a));
  }

  // A ray lying exactly in a lattice plane crosses the cells on both sides of
  // it; walk those as companions of the main cell.
  std::vector<CellCoord> companions{{0, 0, 0}};
  for (int a = 0; a < 3; ++a) {
    if (ray.direction[a] != 0.0) continue;
    const double q = (ray.origin[a] - o[a]) / l;
    if (q != std::floor(q)) continue;
    const std::size_t n = companions.size();
    for (std::size_t i = 0; i < n; ++i) {
      CellCoord c = companions[i];
      axis(c, a) -= 1;
      companions.push_back(c);
    }
  }
  const auto visit_all = [&](const CellCoord& base) {
    for (const CellCoord& off : companions) {
      const CellCoord c = base + off;
      if (walker.in_range(c)) walker.visit(c);
    }
  };

  // The entry point can be off by rounding; cover its neighbourhood so slivers
  // next to the entry are never skipped. Duplicates are removed below.
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) visit_all(cell + CellCoord{dx, dy, dz});

  int step[3];
  double t_max[3];
  const auto boundary_t = [&](int a, const CellCoord& c) {
    const double d = ray.direction[a];
    if (d == 0.0) return std::numeric_limits<double>::infinity();
    const int plane = axis(c, a) + (d > 0.0 ? 1 : 0);
    return (o[a] + plane * l - ray.origin[a]) / d;
  };
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    step[a] = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    t_max[a] = boundary_t(a, cell);
  }

  const double t_end = span->z_out;
  for (;;) {
    const double t_min = std::min({t_max[0], t_max[1], t_max[2]});
    if (!(t_min < t_end)) break;
    const double tol = 1e-9 * (1.0 + std::abs(t_min));
    int tied[3];
    int n_tied = 0;
    for (int a = 0; a < 3; ++a)
      if (t_max[a] <= t_min + tol) tied[n_tied++] = a;

    if (n_tied > 1) {
      // Edge or corner crossing: the cells reached by stepping a proper subset
      // of the tied axes may be grazed by a sliver of positive length.
      for (int mask = 1; mask < (1 << n_tied) - 1; ++mask) {
        CellCoord side = cell;
        for (int i = 0; i < n_tied; ++i)
          if (mask & (1 << i)) axis(side, tied[i]) += step[tied[i]];
        visit_all(side);
      }
    }
    for (int i = 0; i < n_tied; ++i) axis(cell, tied[i]) += step[tied[i]];
    if (!walker.in_range(cell) && companions.size() == 1) break;
    visit_all(cell);
    for (int i = 0; i < n_tied; ++i) t_max[tied[i]] = boundary_t(tied[i], cell);
  }

  std::sort(out.begin(), out.end(), [](const VoxelHit& a, const VoxelHit& b) {
    return a.z_in != b.z_in ? a.z_in < b.z_in : a.voxel_id < b.voxel_id;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const VoxelHit& a, const VoxelHit& b) { return a.voxel_id == b.voxel_id; }),
            out.end());
}

}  // namespace nsvf
