#include "doctest.h"
#include "nsvf/field.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace nsvf;

namespace {

double act(Activation a, double x) { return a == Activation::kRelu ? std::max(0.0, x) : softplus(x); }

// Straight-line evaluation with scalar loops over the documented parameter layout.
struct Plain {
  double sigma;
  Vec3 color;
};

Plain plain_query(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net, const Vec3& p,
                  const Vec3& v) {
  const FieldConfig& c = net.config();
  const int id = *grid.locate(p);
  const Vec3 local = (p - grid.cell_box(id).min) / grid.voxel_size();
  std::vector<double> g(static_cast<std::size_t>(c.embed_dim), 0.0);
  for (int k = 0; k < 8; ++k) {
    const CellCoord o = corner_offset(k);
    const double w = (o.x ? local.x() : 1 - local.x()) * (o.y ? local.y() : 1 - local.y()) *
                     (o.z ? local.z() : 1 - local.z());
    const auto row = table.row(static_cast<std::size_t>(grid.find_corner(grid.cell(id) + o)));
    for (int i = 0; i < c.embed_dim; ++i) g[static_cast<std::size_t>(i)] += w * row[static_cast<std::size_t>(i)];
  }
  const auto encode = [](const std::vector<double>& x, int L) {
    std::vector<double> out(x);
    for (int l = 0; l < L; ++l) {
      for (double xi : x) out.push_back(std::sin(std::pow(2.0, l) * std::numbers::pi * xi));
      for (double xi : x) out.push_back(std::cos(std::pow(2.0, l) * std::numbers::pi * xi));
    }
    return out;
  };
  const auto params = net.parameters();
  const auto dense = [&](int layer, const std::vector<double>& in) {
    const auto& L = net.layers()[static_cast<std::size_t>(layer)];
    std::vector<double> out(static_cast<std::size_t>(L.out));
    for (int o = 0; o < L.out; ++o) {
      double s = params[L.offset + static_cast<std::size_t>(L.in) * L.out + o];
      for (int i = 0; i < L.in; ++i) s += params[L.offset + static_cast<std::size_t>(i) * L.out + o] * in[i];
      out[static_cast<std::size_t>(o)] = s;
    }
    return out;
  };
  std::vector<double> h = encode(g, c.feature_freqs);
  int layer = 0;
  for (; layer < c.density_layers; ++layer) {
    h = dense(layer, h);
    for (double& x : h) x = act(c.hidden_activation, x);
  }
  Plain r;
  r.sigma = softplus(dense(layer++, h)[0]);
  std::vector<double> x = h;
  const auto dir = encode({v.x(), v.y(), v.z()}, c.direction_freqs);
  x.insert(x.end(), dir.begin(), dir.end());
  for (int i = 0; i < c.color_layers; ++i, ++layer) {
    x = dense(layer, x);
    for (double& e : x) e = act(c.hidden_activation, e);
  }
  const auto out = dense(layer, x);
  r.color = Vec3(sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2]));
  return r;
}

struct SmallField {
  SparseVoxelGrid grid;
  EmbeddingTable table;
  FieldNetwork net;
};

SmallField small_field(std::uint64_t seed, Activation a = Activation::kSoftplus) {
  std::mt19937_64 rng(seed);
  FieldConfig cfg;
  cfg.embed_dim = 8;
  cfg.hidden = 16;
  cfg.feature_freqs = 2;
  cfg.direction_freqs = 1;
  cfg.hidden_activation = a;
  SmallField f{init_from_bbox({{-1, -1, -1}, {1, 1, 1}}, 8), {}, FieldNetwork(cfg)};
  f.table = EmbeddingTable(f.grid.num_corners(), cfg.embed_dim);
  f.table.randomize(rng, 0.5);
  f.net.initialize(rng);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& p : f.net.parameters()) p += u(rng);  // nonzero biases
  return f;
}

}  // namespace

TEST_CASE("trilinear: nodes, center, affine reproduction, NeRF case") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> corners(8, std::vector<double>(4));
  for (auto& c : corners)
    for (double& x : c) x = n(rng);
  for (int k = 0; k < 8; ++k) {
    const CellCoord o = corner_offset(k);
    CHECK(trilinear(corners, Vec3(o.x, o.y, o.z)) == corners[static_cast<std::size_t>(k)]);
  }
  const auto mid = trilinear(corners, Vec3(0.5, 0.5, 0.5));
  for (std::size_t i = 0; i < 4; ++i) {
    double mean = 0;
    for (auto& c : corners) mean += c[i] / 8;
    CHECK(mid[i] == doctest::Approx(mean).epsilon(1e-14));
  }
  std::uniform_real_distribution<double> u(0, 1);
  const Vec3 a(n(rng), n(rng), n(rng));
  const double b = n(rng);
  std::vector<std::vector<double>> affine(8), position(8);
  for (int k = 0; k < 8; ++k) {
    const CellCoord o = corner_offset(k);
    const Vec3 q(o.x, o.y, o.z);
    affine[static_cast<std::size_t>(k)] = {a.dot(q) + b};
    position[static_cast<std::size_t>(k)] = {q.x(), q.y(), q.z()};
  }
  for (int i = 0; i < 100; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const auto w = trilinear_weights(p);
    double sum = 0;
    for (double x : w) {
      CHECK(x >= 0.0);
      sum += x;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(trilinear(affine, p)[0] == doctest::Approx(a.dot(p) + b).epsilon(1e-12));
    const auto q = trilinear(position, p);
    CHECK((Vec3(q[0], q[1], q[2]) - p).norm() < 1e-14);
  }
  CHECK_THROWS_AS(trilinear(corners, Vec3(1.01, 0.5, 0.5)), InvalidArgument);
  CHECK_THROWS_AS(trilinear(corners, Vec3(0.5, -0.01, 0.5)), InvalidArgument);
}

TEST_CASE("positional_encode: zeros, L = 0, length 416") {
  const std::vector<double> zero(5, 0.0);
  const auto e = positional_encode(zero, 3);
  REQUIRE(e.size() == 35);
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 5; ++i) {
      CHECK(e[static_cast<std::size_t>((1 + 2 * l) * 5 + i)] == 0.0);
      CHECK(e[static_cast<std::size_t>((2 + 2 * l) * 5 + i)] == 1.0);
    }
  const std::vector<double> x{0.1, -0.4, 2.5};
  CHECK(positional_encode(x, 0) == x);
  CHECK(positional_encode(std::vector<double>(32, 0.3), 6).size() == 416);
  FieldConfig cfg;
  CHECK(cfg.feature_size() == 416);
  CHECK_THROWS_AS(positional_encode(x, -1), InvalidArgument);

  // Matrix form agrees with the vector form.
  Eigen::MatrixXd m(3, 1), out(21, 1);
  m << 0.1, -0.4, 2.5;
  positional_encode(m, 3, out);
  const auto v = positional_encode(x, 3);
  for (int i = 0; i < 21; ++i) CHECK(out(i, 0) == doctest::Approx(v[static_cast<std::size_t>(i)]).epsilon(1e-14));
}

TEST_CASE("query: zero network gives ln 2 and grey") {
  FieldConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden = 8;
  const FieldNetwork net(cfg);
  const SparseVoxelGrid g = init_from_bbox({{0, 0, 0}, {1, 1, 1}}, 1);
  EmbeddingTable t(g.num_corners(), 4);
  std::mt19937_64 rng(0);
  t.randomize(rng);
  const QueryResult r = query(g, t, net, {0.3, 0.4, 0.5}, {0, 0, 1});
  CHECK(r.sigma == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK((r.color - Vec3::Constant(0.5)).norm() < 1e-15);
  CHECK_THROWS_AS(query(g, t, net, {1.5, 0.4, 0.5}, {0, 0, 1}), InvalidArgument);
}

TEST_CASE("query: density ignores view direction; matches tape-free oracle") {
  for (Activation a : {Activation::kRelu, Activation::kSoftplus}) {
    SmallField f = small_field(17, a);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.99, 0.99);
    for (int i = 0; i < 100; ++i) {
      const Vec3 p(u(rng), u(rng), u(rng));
      const Vec3 v1 = testing::random_unit(rng), v2 = testing::random_unit(rng);
      const QueryResult r1 = query(f.grid, f.table, f.net, p, v1);
      const QueryResult r2 = query(f.grid, f.table, f.net, p, v2);
      CHECK(r1.sigma == r2.sigma);
      CHECK(r1.sigma >= 0.0);
      CHECK((r1.color.array() > 0.0).all());
      CHECK((r1.color.array() < 1.0).all());
      const Plain ref = plain_query(f.grid, f.table, f.net, p, v1);
      CHECK(std::abs(ref.sigma - r1.sigma) < 1e-10);
      CHECK((ref.color - r1.color).norm() < 1e-10);
    }
  }
}

TEST_CASE("query_backward: zero upstream, single corner, finite differences") {
  SmallField f = small_field(23);
  const Vec3 p(0.31, -0.42, 0.57), v = Vec3(0.2, -0.5, 0.8).normalized();
  GradientBuffer g(f.net, f.table);
  const QueryResult r = query(f.grid, f.table, f.net, p, v);
  query_backward(r, f.net, 0.0, Vec3::Zero(), g);
  CHECK(g.network.norm() == 0.0);
  for (double x : g.embeddings) CHECK(x == 0.0);

  // A point on a lattice corner: only that corner row gets gradient.
  const Vec3 corner(0.0, 0.0, 0.0);
  const QueryResult rc = query(f.grid, f.table, f.net, corner, v);
  GradientBuffer gc(f.net, f.table);
  query_backward(rc, f.net, 1.0, Vec3(0.3, -0.2, 0.1), gc);
  const int id = *f.grid.locate(corner);
  const Vec3 local = f.grid.local_coords(id, corner);
  CellCoord offset{static_cast<int>(std::lround(local.x())), static_cast<int>(std::lround(local.y())),
                   static_cast<int>(std::lround(local.z()))};
  const std::int32_t row = f.grid.find_corner(f.grid.cell(id) + offset);
  for (std::size_t r2 = 0; r2 < f.table.rows(); ++r2) {
    double norm = 0;
    for (int i = 0; i < 8; ++i) norm += std::abs(gc.embeddings[r2 * 8 + static_cast<std::size_t>(i)]);
    if (static_cast<std::int32_t>(r2) == row)
      CHECK(norm > 0.0);
    else
      CHECK(norm == 0.0);
  }

  // Scalar loss L = a * sigma + b . color.
  const double a = 0.7;
  const Vec3 b(-0.4, 0.9, 0.25);
  const auto loss = [&] {
    const QueryResult q = query(f.grid, f.table, f.net, p, v);
    return a * q.sigma + b.dot(q.color);
  };
  GradientBuffer gf(f.net, f.table);
  query_backward(query(f.grid, f.table, f.net, p, v), f.net, a, b, gf);
  int checked = 0;
  for (std::size_t i = 0; i < f.net.num_parameters(); ++i) {
    const double num = testing::central_difference(f.net.parameters()[i], 1e-3, loss);
    CHECK(testing::gradients_agree(gf.network(static_cast<Eigen::Index>(i)), num));
    ++checked;
  }
  for (std::size_t i = 0; i < f.table.data().size(); ++i) {
    if (gf.embeddings[i] == 0.0) continue;
    const double num = testing::central_difference(f.table.data()[i], 1e-3, loss);
    CHECK(testing::gradients_agree(gf.embeddings[i], num));
    ++checked;
  }
  CHECK(checked > static_cast<int>(f.net.num_parameters()));
}

TEST_CASE("NeRF degenerate case: embeddings at corner positions") {
  FieldConfig cfg;
  cfg.embed_dim = 3;
  cfg.feature_freqs = 6;
  const SparseVoxelGrid g = init_from_bbox({{-1, -1, -1}, {1, 1, 1}}, 512);  // voxel size 0.25
  EmbeddingTable t(g.num_corners(), 3);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const Vec3 c = g.corner_position(g.corners()[r]);
    for (int i = 0; i < 3; ++i) t.row(r)[static_cast<std::size_t>(i)] = static_cast<float>(c[i]);
  }
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const int id = *g.locate(p);
    const FieldPoint fp{id, g.local_coords(id, p)};
    Eigen::MatrixXd raw, enc;
    gather_features(g, t, cfg, {&fp, 1}, raw, enc, nullptr);
    const auto ref = positional_encode(std::vector<double>{p.x(), p.y(), p.z()}, 6);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(enc(static_cast<Eigen::Index>(k), 0) - ref[k]) < 1e-6);
  }
}
