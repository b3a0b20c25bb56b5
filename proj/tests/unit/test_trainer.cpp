#include "doctest.h"
#include "nsvf/oracle.hpp"
#include "nsvf/trainer.hpp"
#include "oracles.hpp"

#include <omp.h>

#include <cmath>
#include <random>

using namespace nsvf;
using nsvf::testing::central_difference;
using nsvf::testing::gradients_agree;

namespace {

struct Fixture {
  VoxelField field;
  FieldNetwork net;
  Vec3 background{0.3, 0.6, 0.2};
  std::vector<TrainRay> batch;
};

// A 2x2x2 grid at the origin with rays through it from random directions.
Fixture make_fixture(int rays, bool with_depth, std::uint64_t seed, int feature_freqs = 2) {
  std::mt19937_64 rng(seed);
  FieldConfig cfg = testing::tiny_config(8, 16);
  cfg.feature_freqs = feature_freqs;
  cfg.hidden_activation = Activation::kSoftplus;
  Fixture f;
  std::vector<CellCoord> cells;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cells.push_back({x, y, z});
  f.field.grid = SparseVoxelGrid(0.5, Vec3::Zero(), 0, cells);
  f.field.table = EmbeddingTable(f.field.grid.num_corners(), cfg.embed_dim);
  f.field.table.randomize(rng, 0.5);
  f.net = FieldNetwork(cfg);
  f.net.initialize(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < rays; ++i) {
    const Vec3 target = Vec3(0.5, 0.5, 0.5) + 0.3 * Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5);
    const Vec3 origin = target - 2.0 * testing::random_unit(rng);
    TrainRay r;
    r.ray = make_ray(origin, target - origin);
    r.target = Vec3(u(rng), u(rng), u(rng));
    if (with_depth && i % 2 == 0) r.depth = 0.5 + 4.0 * u(rng);
    r.seed = rng();
    r.hits = true;
    f.batch.push_back(r);
  }
  return f;
}

LossConfig loss_config(int slots = 4) {
  LossConfig cfg;
  cfg.render.step_size = 0.07;
  cfg.render.jitter = true;
  cfg.render.early_stop_eps = 0.01;  // must be ignored
  cfg.lambda_reg = 0.05;
  cfg.depth_weight = 0.1;
  cfg.slots = slots;
  return cfg;
}

PosedImageSet small_oracle(const std::string& scene, int n, int res, std::uint64_t seed) {
  OracleDatasetOptions opt;
  opt.n_train = n;
  opt.n_test = 1;
  opt.resolution = res;
  std::mt19937_64 rng(seed);
  return generate_oracle_dataset(builtin_scene(scene), opt, rng).first;
}

TrainConfig quick_train(int steps) {
  TrainConfig cfg;
  cfg.rays_per_image = 64;
  cfg.images_per_batch = 2;
  cfg.lr = 5e-3;
  cfg.total_steps = steps;
  cfg.prune_period = 10;
  cfg.subdivide_milestones = {10};
  cfg.prune.samples_per_axis = 4;
  cfg.log_every = 5;
  return cfg;
}

}  // namespace

TEST_CASE("beta regularizer: zeros at 0 and 1, peak at 0.5, derivative") {
  CHECK(beta_regularizer(0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(beta_regularizer(1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(beta_regularizer(0.5) > beta_regularizer(0.2));
  CHECK(beta_regularizer(0.5) > beta_regularizer(0.8));
  CHECK(beta_regularizer_derivative(0.5) == doctest::Approx(0.0));
  for (double a : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    const double h = 1e-6;
    const double fd = (beta_regularizer(a + h) - beta_regularizer(a - h)) / (2 * h);
    CHECK(gradients_agree(beta_regularizer_derivative(a), fd, 1e-6));
  }
}

TEST_CASE("loss_and_grads matches finite differences of loss_value") {
  Fixture f = make_fixture(12, true, 7);
  const LossConfig cfg = loss_config();
  GradientBuffer g;
  const LossTerms terms = loss_and_grads(f.batch, f.field, f.background, f.net, cfg, g);
  REQUIRE(terms.rays == 12);
  CHECK(terms.total == doctest::Approx(terms.color + cfg.lambda_reg * terms.regularizer + cfg.depth_weight * terms.depth));
  CHECK(terms.total == doctest::Approx(loss_value(f.batch, f.field, f.background, f.net, cfg).total).epsilon(1e-12));

  const auto loss = [&] { return loss_value(f.batch, f.field, f.background, f.net, cfg).total; };
  std::mt19937_64 pick(3);
  auto params = f.net.parameters();
  int failures = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t i = pick() % params.size();
    const double fd = central_difference(params[i], 1e-5, loss);
    if (!gradients_agree(g.network(static_cast<Eigen::Index>(i)), fd, 1e-4, 1e-7)) {
      ++failures;
      MESSAGE("param " << i << " analytic " << g.network(static_cast<Eigen::Index>(i)) << " fd " << fd);
    }
  }
  auto& emb = f.field.table.data();
  for (int t = 0; t < 40; ++t) {
    const std::size_t i = pick() % emb.size();
    const double fd = central_difference(emb[i], 1e-3, loss);
    if (!gradients_agree(g.embeddings[i], fd, 1e-3, 1e-6)) {
      ++failures;
      MESSAGE("embedding " << i << " analytic " << g.embeddings[i] << " fd " << fd);
    }
  }
  for (int c = 0; c < 3; ++c) {
    const double fd = central_difference(f.background[c], 1e-5, loss);
    if (!gradients_agree(g.background[c], fd, 1e-4, 1e-7)) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("embedding gradients at L = 6 match extrapolated differences") {
  // Plain central differences at h = 1e-3 are too coarse for sin(32 pi x);
  // Richardson extrapolation cancels the h^2 term.
  Fixture f = make_fixture(8, true, 21, 6);
  const LossConfig cfg = loss_config();
  GradientBuffer g;
  loss_and_grads(f.batch, f.field, f.background, f.net, cfg, g);
  const auto loss = [&] { return loss_value(f.batch, f.field, f.background, f.net, cfg).total; };
  auto& emb = f.field.table.data();
  int failures = 0;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    const double coarse = central_difference(emb[i], 1e-3, loss);
    const double fine = central_difference(emb[i], 5e-4, loss);
    const double fd = (4.0 * fine - coarse) / 3.0;
    if (!gradients_agree(g.embeddings[i], fd, 1e-4, 1e-6)) {
      ++failures;
      MESSAGE("embedding " << i << " analytic " << g.embeddings[i] << " extrapolated " << fd);
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("loss_and_grads: parallel matches serial and ignores thread count") {
  Fixture f = make_fixture(40, true, 11);
  const LossConfig cfg = loss_config(8);
  GradientBuffer serial, one, many;
  const LossTerms ts = loss_and_grads_serial(f.batch, f.field, f.background, f.net, cfg, serial);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const LossTerms t1 = loss_and_grads(f.batch, f.field, f.background, f.net, cfg, one);
  omp_set_num_threads(4);
  const LossTerms t4 = loss_and_grads(f.batch, f.field, f.background, f.net, cfg, many);
  omp_set_num_threads(saved);

  CHECK(t1.total == t4.total);
  CHECK(one.network == many.network);
  CHECK(one.embeddings == many.embeddings);
  CHECK(one.background == many.background);

  CHECK(ts.total == doctest::Approx(t1.total).epsilon(1e-12));
  CHECK((serial.network - one.network).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + serial.network.cwiseAbs().maxCoeff()));
  double worst = 0.0;
  for (std::size_t i = 0; i < one.embeddings.size(); ++i)
    worst = std::max(worst, std::abs(one.embeddings[i] - serial.embeddings[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("loss_and_grads: invalid input and non-finite values") {
  Fixture f = make_fixture(4, false, 5);
  GradientBuffer g;
  CHECK_THROWS_AS(loss_and_grads({}, f.field, f.background, f.net, loss_config(), g), InvalidArgument);
  LossConfig bad = loss_config();
  bad.slots = 0;
  CHECK_THROWS_AS(loss_and_grads(f.batch, f.field, f.background, f.net, bad, g), InvalidArgument);

  // Without depth supervision the depth term is zero.
  const LossTerms t = loss_value(f.batch, f.field, f.background, f.net, loss_config());
  CHECK(t.depth == 0.0);

  f.net.parameters()[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loss_and_grads(f.batch, f.field, f.background, f.net, loss_config(), g), NumericError);
  CHECK_THROWS_AS(loss_and_grads_serial(f.batch, f.field, f.background, f.net, loss_config(), g), NumericError);
}

TEST_CASE("sample_ray_batch: targets, resampling and seeds") {
  const PosedImageSet data = small_oracle("sphere", 3, 16, 2);
  TrainConfig cfg;
  cfg.rays_per_image = 50;
  cfg.images_per_batch = 3;
  std::mt19937_64 rng(1);

  // A single small voxel: most pixels miss it, the sampler should find it.
  const SparseVoxelGrid tiny(0.8, Vec3(-0.4, -0.4, -0.4), 0, std::vector<CellCoord>{{0, 0, 0}});
  cfg.max_resample = 64;
  const auto batch = sample_ray_batch(data, tiny, cfg, rng);
  REQUIRE(batch.size() == 150);
  std::size_t hits = 0;
  for (const TrainRay& r : batch) {
    hits += r.hits ? 1 : 0;
    CHECK(r.hits == !intersect_grid(r.ray, tiny).empty());
    CHECK(std::isfinite(r.depth));
  }
  CHECK(hits >= 135);
  cfg.max_resample = 0;
  std::size_t plain = 0;
  for (const TrainRay& r : sample_ray_batch(data, tiny, cfg, rng)) plain += r.hits ? 1 : 0;
  CHECK(plain < hits);

  // Targets are the pixel colors of the view the ray came from.
  const SparseVoxelGrid box = init_from_bbox(data.bbox, 8);
  for (const TrainRay& r : sample_ray_batch(data, box, cfg, rng)) {
    bool found = false;
    for (const PosedImage& v : data.views) {
      if ((r.ray.origin - v.camera.translation).norm() > 1e-9) continue;
      const Vec2 p = project_direction(v.camera, r.ray.direction);
      const int x = static_cast<int>(std::floor(p[0])), y = static_cast<int>(std::floor(p[1]));
      if (x >= 0 && y >= 0 && x < v.camera.width && y < v.camera.height && v.image.pixel(x, y).isApprox(r.target))
        found = true;
    }
    CHECK(found);
  }

  const SparseVoxelGrid empty(0.5, Vec3::Zero(), 0, std::vector<CellCoord>{});
  CHECK_THROWS_AS(sample_ray_batch(data, empty, cfg, rng), InvalidArgument);
}

TEST_CASE("TrainConfig::validate") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
  TrainConfig c = ok;
  c.subdivide_milestones = {300, 200};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ok;
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = ok;
  c.gradient_slots = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("train: schedule, remapping, logging and determinism") {
  const PosedImageSet data = small_oracle("sphere", 4, 16, 3);
  FieldConfig fc = testing::tiny_config(8, 16);
  TrainConfig cfg = quick_train(16);
  cfg.initial_sigma_bias = 0.0;  // 10 steps from a transparent start would prune everything

  const auto run = [&](std::vector<nlohmann::json>* log, std::vector<PruneEvent>* prunes) {
    std::mt19937_64 rng(42);
    SceneSet set = initialize_scenes({data.bbox}, fc, cfg, rng, 64);
    TrainHooks hooks;
    if (log) hooks.log = [log](const nlohmann::json& j) { log->push_back(j); };
    if (prunes)
      hooks.on_prune = [prunes](const PruneEvent& e) {
        CHECK(e.before->grid.num_cells() >= e.after->grid.num_cells());
        prunes->push_back(e);
      };
    const TrainSummary s = train(set, {&data}, cfg, rng, hooks);
    return std::make_pair(std::move(set), s);
  };

  std::vector<nlohmann::json> log;
  std::vector<PruneEvent> prunes;
  auto [set, summary] = run(&log, &prunes);
  CHECK(summary.steps == 16);
  CHECK(summary.initial_voxels.at(0) == 64);
  CHECK(summary.subdivide_steps == std::vector<int>{10});
  CHECK(summary.prune_steps == std::vector<int>{10});
  CHECK(prunes.size() == 1);
  CHECK(set.scenes[0].field.grid.level() == 1);
  CHECK(set.scenes[0].field.grid.voxel_size() == doctest::Approx(0.25));
  CHECK(set.step_size == doctest::Approx(0.25 / cfg.step_ratio));
  CHECK(summary.final_voxels.at(0) == set.scenes[0].field.grid.num_cells());
  CHECK(set.scenes[0].field.table.rows() == set.scenes[0].field.grid.num_corners());

  int step_records = 0, events = 0;
  for (const auto& j : log) {
    if (j.contains("event")) {
      ++events;
    } else {
      ++step_records;
      CHECK(j.at("loss").get<double>() >= 0.0);
      CHECK(j.contains("voxels"));
    }
  }
  CHECK(events == 2);
  CHECK(step_records == 4);  // steps 0, 5, 10 and 15, which is also the last

  auto [again, summary2] = run(nullptr, nullptr);
  CHECK(summary2.final_voxels == summary.final_voxels);
  CHECK(again.network.parameters()[3] == set.network.parameters()[3]);
  CHECK(std::equal(again.network.parameters().begin(), again.network.parameters().end(),
                   set.network.parameters().begin()));
  CHECK(again.scenes[0].background == set.scenes[0].background);
}

TEST_CASE("train: loss decreases on an oracle scene") {
  const PosedImageSet data = small_oracle("sphere", 6, 16, 4);
  FieldConfig fc = testing::tiny_config(8, 32);
  TrainConfig cfg = quick_train(120);
  cfg.subdivide_milestones = {};
  cfg.prune_period = 1000;
  cfg.lr = 1e-2;
  std::mt19937_64 rng(9);
  SceneSet set = initialize_scenes({data.bbox}, fc, cfg, rng, 64);
  std::vector<double> losses;
  TrainHooks hooks;
  hooks.log = [&](const nlohmann::json& j) {
    if (!j.contains("event")) losses.push_back(j.at("mse").get<double>());
  };
  train(set, {&data}, cfg, rng, hooks);
  REQUIRE(losses.size() > 4);
  const double early = (losses[0] + losses[1]) / 2;
  const double late = (losses[losses.size() - 1] + losses[losses.size() - 2]) / 2;
  CHECK(late < 0.5 * early);
}

TEST_CASE("train: pruning everything aborts with a diagnostic") {
  const PosedImageSet data = small_oracle("empty", 3, 16, 5);
  std::mt19937_64 rng(1);
  TrainConfig cfg = quick_train(12);
  cfg.subdivide_milestones = {};
  cfg.prune_period = 5;
  SceneSet set = initialize_scenes({data.bbox}, testing::tiny_config(4, 8), cfg, rng, 27);
  // sigma = softplus(-30): fully transparent everywhere.
  set.network = testing::constant_network(set.network.config(), -30.0, Vec3::Zero());
  try {
    train(set, {&data}, cfg, rng);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(std::string(e.what()).find("step 5") != std::string::npos);
  }
}

TEST_CASE("train: input validation and multi-scene round robin") {
  const PosedImageSet a = small_oracle("sphere", 2, 16, 6);
  const PosedImageSet b = small_oracle("sphere_box", 2, 16, 7);
  std::mt19937_64 rng(2);
  TrainConfig cfg = quick_train(4);
  cfg.subdivide_milestones = {};
  SceneSet one = initialize_scenes({a.bbox}, testing::tiny_config(), cfg, rng, 27);
  CHECK_THROWS_AS(train(one, {&a, &b}, cfg, rng), InvalidArgument);
  CHECK_THROWS_AS(train_multiscene(one, {&a}, cfg, rng), InvalidArgument);

  SceneSet two = initialize_scenes({a.bbox, b.bbox}, testing::tiny_config(), cfg, rng, 27);
  std::vector<int> scenes;
  TrainHooks hooks;
  hooks.log = [&](const nlohmann::json& j) { scenes.push_back(j.at("scene").get<int>()); };
  cfg.log_every = 1;
  train_multiscene(two, {&a, &b}, cfg, rng, hooks);
  CHECK(scenes == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("evaluate_views and mean_psnr") {
  const PosedImageSet data = small_oracle("sphere", 2, 16, 8);
  std::mt19937_64 rng(3);
  TrainConfig cfg;
  SceneSet set = initialize_scenes({data.bbox}, testing::tiny_config(), cfg, rng, 27);
  set.network = testing::constant_network(set.network.config(), -30.0, Vec3::Zero());
  set.scenes[0].background = Vec3::Ones();
  // Transparent field over the white background: only the object pixels differ.
  const auto m = evaluate_views(set, 0, data, 0.01);
  REQUIRE(m.size() == 2);
  for (const ViewMetrics& v : m) {
    CHECK(std::isfinite(v.psnr));
    CHECK(v.ssim < 1.0);
    CHECK(v.evals > 0);
  }
  CHECK(mean_psnr(m) == doctest::Approx((m[0].psnr + m[1].psnr) / 2));
}
