// Serial reference vs OpenMP kernels on a small synthetic scene.
//   nsvf_bench --benchmark_filter=Render
// Thread count follows OMP_NUM_THREADS.

#include "nsvf/oracle.hpp"
#include "nsvf/prune.hpp"
#include "nsvf/renderer.hpp"
#include "nsvf/trainer.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

namespace {

using namespace nsvf;

struct Fixture {
  PosedImageSet data;
  SceneSet set;
  std::vector<TrainRay> batch;
  LossConfig loss;

  Fixture() {
    OracleDatasetOptions o;
    o.n_train = 4;
    o.n_test = 0;
    o.resolution = 64;
    std::mt19937_64 rng(1);
    data = generate_oracle_dataset(builtin_scene("sphere_box"), o, rng).first;
    FieldConfig fc;
    fc.embed_dim = 16;
    fc.hidden = 32;
    fc.color_layers = 1;
    TrainConfig cfg;
    cfg.rays_per_image = 256;
    set = initialize_scenes({data.bbox}, fc, cfg, rng, 1000);
    set.network.set_sigma_bias(0.5);  // mostly opaque, so rays do real work
    batch = sample_ray_batch(data, set.scenes[0].field.grid, cfg, rng);
    loss.render.step_size = set.step_size;
    loss.render.jitter = true;
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

RenderConfig render_config() {
  RenderConfig rc;
  rc.step_size = fixture().set.step_size;
  rc.early_stop_eps = 0.01;
  return rc;
}

void BM_RenderSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  const VoxelField& field = f.set.scenes[0].field;
  for (auto _ : state)
    benchmark::DoNotOptimize(render_image_serial(f.data.views[0].camera, field.grid, field.table, f.set.network,
                                                 render_config(), f.set.scenes[0].background));
}

void BM_RenderParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  const VoxelField& field = f.set.scenes[0].field;
  for (auto _ : state)
    benchmark::DoNotOptimize(render_image(f.data.views[0].camera, field.grid, field.table, f.set.network,
                                          render_config(), f.set.scenes[0].background));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_LossSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  GradientBuffer g(f.set.network, f.set.scenes[0].field.table);
  for (auto _ : state)
    benchmark::DoNotOptimize(loss_and_grads_serial(f.batch, f.set.scenes[0].field, f.set.scenes[0].background,
                                                   f.set.network, f.loss, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void BM_LossParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  GradientBuffer g(f.set.network, f.set.scenes[0].field.table);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        loss_and_grads(f.batch, f.set.scenes[0].field, f.set.scenes[0].background, f.set.network, f.loss, g));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
  state.counters["threads"] = omp_get_max_threads();
}

void BM_PruneSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  const VoxelField& field = f.set.scenes[0].field;
  for (auto _ : state) benchmark::DoNotOptimize(prune_serial(field.grid, field.table, f.set.network, {8, 0.5}));
}

void BM_PruneParallel(benchmark::State& state) {
  const Fixture& f = fixture();
  const VoxelField& field = f.set.scenes[0].field;
  for (auto _ : state) benchmark::DoNotOptimize(prune(field.grid, field.table, f.set.network, {8, 0.5}));
  state.counters["threads"] = omp_get_max_threads();
}

}  // namespace

BENCHMARK(BM_RenderSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_LossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossParallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PruneSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PruneParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
