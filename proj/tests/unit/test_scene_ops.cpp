#include "doctest.h"
#include "nsvf/checkpoint.hpp"
#include "nsvf/edit_script.hpp"
#include "nsvf/scene_ops.hpp"
#include "oracles.hpp"

#include <random>

using namespace nsvf;

namespace {

// Two separated 2x2x2 blocks inside a 6x2x2 lattice of 0.25 voxels.
VoxelField two_blocks(std::mt19937_64& rng, int dim) {
  std::vector<CellCoord> cells;
  for (int x : {0, 1, 4, 5})
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cells.push_back({x, y, z});
  VoxelField f;
  f.grid = SparseVoxelGrid(0.25, Vec3(-0.75, -0.25, -0.25), 0, cells);
  f.table = EmbeddingTable(f.grid.num_corners(), dim);
  f.table.randomize(rng, 0.5);
  return f;
}

std::shared_ptr<const FieldNetwork> dense_network(std::mt19937_64& rng, int dim) {
  FieldConfig cfg = testing::tiny_config(dim, 16);
  auto net = std::make_shared<FieldNetwork>(cfg);
  net->initialize(rng);
  // Push densities up so the blocks are clearly visible.
  auto p = net->parameters();
  const auto& l = net->layers()[static_cast<std::size_t>(net->sigma_layer())];
  p[l.offset + static_cast<std::size_t>(l.in) * l.out] = 3.0;
  return net;
}

Camera front_camera(int res = 32) {
  return look_at(Vec3(0, -4, 0.3), Vec3::Zero(), Vec3(0, 0, 1), res * 1.2, res, res);
}

RenderConfig render_cfg() {
  RenderConfig cfg;
  cfg.step_size = 0.03;
  cfg.early_stop_eps = 0.0;
  return cfg;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  return m;
}

}  // namespace

TEST_CASE("select_voxels: whole box, disjoint and half-space") {
  std::mt19937_64 rng(1);
  const VoxelField f = two_blocks(rng, 4);
  CHECK(select_voxels(f.grid, f.grid.bounds()).size() == f.grid.num_cells());
  CHECK(select_voxels(f.grid, Aabb{Vec3::Constant(5), Vec3::Constant(6)}).empty());
  const auto half = select_voxels(f.grid, Aabb{Vec3(-10, -10, -10), Vec3(0, 10, 10)});
  CHECK(half.size() == f.grid.num_cells() / 2);
}

TEST_CASE("delete_voxels: none, all, unknown id, survivors unchanged") {
  std::mt19937_64 rng(2);
  const VoxelField f = two_blocks(rng, 4);
  const VoxelField same = delete_voxels(f.grid, f.table, {});
  CHECK(same.grid == f.grid);
  CHECK(same.table == f.table);
  std::vector<int> every(f.grid.num_cells());
  for (std::size_t i = 0; i < every.size(); ++i) every[i] = static_cast<int>(i);
  const VoxelField none = delete_voxels(f.grid, f.table, every);
  CHECK(none.grid.empty());
  CHECK(none.table.rows() == 0);
  CHECK_THROWS_AS(delete_voxels(f.grid, f.table, {99}), InvalidArgument);

  const auto left = select_voxels(f.grid, Aabb{Vec3(-10, -10, -10), Vec3(0, 10, 10)});
  const VoxelField right = delete_voxels(f.grid, f.table, left);
  REQUIRE(right.grid.num_cells() == 8);
  for (std::size_t r = 0; r < right.grid.num_corners(); ++r) {
    const std::int32_t old = f.grid.find_corner(right.grid.corners()[r]);
    REQUIRE(old >= 0);
    for (int k = 0; k < 4; ++k) CHECK(right.table.row(r)[static_cast<std::size_t>(k)] == f.table.row(static_cast<std::size_t>(old))[static_cast<std::size_t>(k)]);
  }
}

TEST_CASE("composite of one instance equals render_image; parallel equals serial") {
  std::mt19937_64 rng(3);
  VoxelField f = two_blocks(rng, 4);
  auto net = dense_network(rng, 4);
  const Camera cam = front_camera();
  const RenderedImage direct = render_image(cam, f.grid, f.table, *net, render_cfg(), Vec3(1, 1, 1));
  CompositeScene scene;
  scene.instances.push_back(make_instance(f, net, Vec3(1, 1, 1)));
  scene.background = Vec3(1, 1, 1);
  const RenderedImage comp = render_composite(scene, cam, render_cfg());
  CHECK(comp.rgb == direct.rgb);
  CHECK(comp.depth == direct.depth);
  CHECK(comp.evals == direct.evals);
  CHECK(render_composite_serial(scene, cam, render_cfg()).rgb == comp.rgb);

  scene.instances.clear();
  CHECK_THROWS_AS(render_composite(scene, cam, render_cfg()), InvalidArgument);
}

TEST_CASE("deleting one block leaves renders of the other unchanged where rays avoid it") {
  std::mt19937_64 rng(4);
  VoxelField f = two_blocks(rng, 4);
  auto net = dense_network(rng, 4);
  CompositeScene full;
  full.instances.push_back(make_instance(f, net));
  CompositeScene edited = full;
  edited.instances[0] = delete_voxels(full.instances[0], select_voxels(f.grid, Aabb{Vec3(-10, -10, -10), Vec3(0, 10, 10)}));
  const Camera cam = front_camera();
  const RenderedImage a = render_composite(full, cam, render_cfg());
  const RenderedImage b = render_composite(edited, cam, render_cfg());
  const Aabb deleted{Vec3(-0.75, -0.25, -0.25), Vec3(-0.25, 0.25, 0.25)};
  int compared = 0, empty_pixels = 0;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = pixel_ray(cam, x + 0.5, y + 0.5);
      if (intersect_aabb(r, deleted)) {
        CHECK(b.transparency.at(x, y) >= a.transparency.at(x, y));
        ++empty_pixels;
        continue;
      }
      ++compared;
      CHECK((a.rgb.pixel(x, y) - b.rgb.pixel(x, y)).cwiseAbs().maxCoeff() <= 1e-6);
    }
  CHECK(compared > 100);
  CHECK(empty_pixels > 10);
}

TEST_CASE("clone: identity duplicate, translated copies, rotation equivariance of hits") {
  std::mt19937_64 rng(5);
  VoxelField f = two_blocks(rng, 4);
  auto net = dense_network(rng, 4);
  CompositeScene scene;
  scene.instances.push_back(make_instance(f, net));
  const std::vector<int> all = select_voxels(f.grid, f.grid.bounds());

  const FieldInstance dup = clone_voxels(scene.instances[0], all, RigidTransform::identity());
  CHECK(dup.table == scene.instances[0].table);  // shared storage
  CHECK(*dup.grid == *scene.instances[0].grid);

  // A clone shifted far along +z is disjoint in the image from the original.
  const Camera cam = look_at(Vec3(0, -6, 0.75), Vec3(0, 0, 0.75), Vec3(0, 0, 1), 40, 48, 48);
  const RenderedImage solo = render_composite(scene, cam, render_cfg());
  CompositeScene two = scene;
  two.instances.push_back(clone_voxels(scene.instances[0], all, RigidTransform::from_euler_degrees(Vec3::Zero(), Vec3(0, 0, 1.5))));
  CompositeScene only_clone;
  only_clone.instances.push_back(two.instances[1]);
  const RenderedImage both = render_composite(two, cam, render_cfg());
  const RenderedImage clone_only = render_composite(only_clone, cam, render_cfg());
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const bool in_a = solo.transparency.at(x, y) < 1.0f;
      const bool in_b = clone_only.transparency.at(x, y) < 1.0f;
      REQUIRE(!(in_a && in_b));
      const Vec3 expect = in_a ? solo.rgb.pixel(x, y) : clone_only.rgb.pixel(x, y);
      CHECK((both.rgb.pixel(x, y) - expect).cwiseAbs().maxCoeff() <= 1e-6);
    }

  // Hits of a transformed instance are the original hits of the transformed ray.
  const RigidTransform t = RigidTransform::from_euler_degrees(Vec3(20, -35, 70), Vec3(0.3, -1.2, 2.0));
  CompositeScene moved;
  moved.instances.push_back(clone_voxels(scene.instances[0], all, t));
  for (int i = 0; i < 500; ++i) {
    const Vec3 target = t.apply_point(Vec3(rng() % 100 / 100.0 - 0.5, 0.1, 0.05));
    const Vec3 origin = target + 3.0 * testing::random_unit(rng);
    const Ray world = make_ray(origin, target - origin);
    const auto hw = composite_hits(moved, world);
    const auto hl = intersect_grid(t.inverse().apply(world), f.grid);
    REQUIRE(hw.size() == hl.size());
    for (std::size_t k = 0; k < hw.size(); ++k) {
      CHECK(hw[k].voxel_id == hl[k].voxel_id);
      CHECK(std::abs(hw[k].z_in - hl[k].z_in) < 1e-9);
      CHECK(std::abs(hw[k].z_out - hl[k].z_out) < 1e-9);
    }
  }
}

TEST_CASE("composite hits are globally sorted and a front occluder hides the back one") {
  std::mt19937_64 rng(6);
  std::vector<CellCoord> block;
  for (int x = 0; x < 4; ++x)
    for (int z = 0; z < 4; ++z) block.push_back({x, 0, z});
  VoxelField slab;
  slab.grid = SparseVoxelGrid(0.25, Vec3(-0.5, -0.125, -0.5), 0, block);
  slab.table = EmbeddingTable(slab.grid.num_corners(), 4);
  auto opaque = std::make_shared<const FieldNetwork>(testing::constant_network(testing::tiny_config(4, 8), 60.0, Vec3(-5, -5, -5)));
  auto red = std::make_shared<const FieldNetwork>(testing::constant_network(testing::tiny_config(4, 8), 60.0, Vec3(5, -5, -5)));
  CompositeScene scene;
  scene.instances.push_back(make_instance(slab, red, Vec3::Ones(), RigidTransform::from_euler_degrees(Vec3::Zero(), Vec3(0, 1, 0))));
  scene.instances.push_back(make_instance(slab, opaque, Vec3::Ones(), RigidTransform::identity()));
  const Ray ray = make_ray(Vec3(0.01, -3, 0.02), Vec3(0, 1, 0));
  const auto hits = composite_hits(scene, ray);
  REQUIRE(hits.size() == 2);
  CHECK(hits[0].instance == 1);
  CHECK(hits[1].instance == 0);
  CHECK(hits[0].z_in <= hits[1].z_in);
  RenderConfig cfg = render_cfg();
  cfg.early_stop_eps = 0.01;
  const PixelResult p = render_composite_ray(scene, ray, cfg);
  CHECK(p.color.x() < 0.01);  // the red slab behind contributes nothing
  const auto samples = sample_ray(hits, render_cfg());
  for (std::size_t i = 1; i < samples.size(); ++i) CHECK(samples[i - 1].z_mid <= samples[i].z_mid);
}

TEST_CASE("checkpoint round trip through a composite") {
  std::mt19937_64 rng(7);
  VoxelField f = two_blocks(rng, 4);
  Checkpoint ckpt;
  ckpt.instances.push_back({f, RigidTransform::identity(), Vec3(0.2, 0.3, 0.4), 0});
  ckpt.network = *dense_network(rng, 4);
  ckpt.step_size = 0.03;
  const CompositeScene scene = composite_from_checkpoint(ckpt);
  CHECK(scene.background == Vec3(0.2, 0.3, 0.4));
  const Checkpoint back = checkpoint_from_composite(scene);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));

  // A partial clone is written with only its own rows.
  CompositeScene edited = scene;
  edited.instances.push_back(clone_voxels(scene.instances[0], {0, 1}, RigidTransform::identity()));
  const Checkpoint two = checkpoint_from_composite(edited);
  CHECK(two.instances[1].field.grid.num_cells() == 2);
  CHECK(two.instances[1].field.table.rows() == two.instances[1].field.grid.num_corners());
}

TEST_CASE("edit script: parsing and line-numbered errors") {
  const auto ops = parse_edit_script(
      "# move the left block\n"
      "\n"
      "select 0 box -1 -1 -1 0 1 1   # world box\n"
      "clone 0 0 2\n"
      "transform 0 0 0 0 0 90\n"
      "select 1 all\n"
      "delete\n");
  REQUIRE(ops.size() == 5);
  CHECK(ops[0].kind == EditOp::Kind::kSelect);
  CHECK(ops[0].line == 3);
  CHECK(ops[0].region.max == Vec3(0, 1, 1));
  CHECK(ops[1].kind == EditOp::Kind::kClone);
  CHECK(ops[1].transform.translation == Vec3(0, 0, 2));
  CHECK(ops[2].transform.rotation.isApprox(RigidTransform::from_euler_degrees(Vec3(0, 0, 90), Vec3::Zero()).rotation));
  CHECK(ops[3].all);
  CHECK(ops[4].line == 7);
  CHECK(parse_edit_script("").empty());
  CHECK(parse_edit_script("# only a comment\n\n").empty());

  const auto error_line = [](const char* text) {
    try {
      parse_edit_script(text);
    } catch (const EditScriptError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(error_line("select 0 all\nexplode\n") == 2);
  CHECK(error_line("\n\nclone 1 2\n") == 3);
  CHECK(error_line("select 0 box 1 1 1 0 0 0\n") == 1);
  CHECK(error_line("select x all\n") == 1);
  CHECK(error_line("delete now\n") == 1);
  CHECK(error_line("transform 1 2 abc\n") == 1);
  try {
    parse_edit_script("select 0 all\nfrobnicate\n");
  } catch (const EditScriptError& e) {
    CHECK(std::string(e.what()).rfind("line 2:", 0) == 0);
  }
}

TEST_CASE("edit script: application") {
  std::mt19937_64 rng(8);
  VoxelField f = two_blocks(rng, 4);
  auto net = dense_network(rng, 4);
  CompositeScene base;
  base.instances.push_back(make_instance(f, net));

  CompositeScene s = base;
  apply_edits(s, {});
  CHECK(s.instances.size() == 1);
  CHECK(s.instances[0].grid == base.instances[0].grid);

  s = base;
  apply_edits(s, parse_edit_script("select 0 all\ndelete\n"));
  CHECK(s.instances[0].grid->empty());
  const RenderedImage bg = render_composite(s, front_camera(16), render_cfg());
  for (float v : bg.rgb.data) CHECK(v == doctest::Approx(1.0));

  s = base;
  apply_edits(s, parse_edit_script("select 0 box -1 -1 -1 0 1 1\ntransform 0 0 1\n"));
  REQUIRE(s.instances.size() == 2);
  CHECK(s.instances[0].grid->num_cells() == 8);
  CHECK(s.instances[1].grid->num_cells() == 8);
  CHECK(s.instances[1].transform.translation == Vec3(0, 0, 1));

  s = base;
  apply_edits(s, parse_edit_script("select 0 all\ntransform 1 0 0\ntransform 0 1 0\n"));
  REQUIRE(s.instances.size() == 1);
  CHECK(s.instances[0].transform.translation.isApprox(Vec3(1, 1, 0)));

  s = base;
  apply_edits(s, parse_edit_script("select 0 all\nclone 0 0 3\nclone 0 0 3\n"));
  REQUIRE(s.instances.size() == 3);
  CHECK(s.instances[2].transform.translation.isApprox(Vec3(0, 0, 6)));

  const auto error_line = [&](const char* text) {
    CompositeScene t = base;
    try {
      apply_edits(t, parse_edit_script(text));
    } catch (const EditScriptError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(error_line("\ndelete\n") == 2);
  CHECK(error_line("select 3 all\n") == 1);
  CHECK(error_line("select 0 all\ndelete\nclone 1 1 1\n") == 3);
}
