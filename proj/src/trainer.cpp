#include "nsvf/trainer.hpp"

#include "nsvf/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace nsvf {
namespace {

RenderConfig training_render(const LossConfig& cfg) {
  RenderConfig r = cfg.render;
  r.early_stop_eps = 0.0;
  return r;
}

struct RayLoss {
  double color = 0.0;
  double reg = 0.0;
  double depth = 0.0;
  bool has_depth = false;
  int evals = 0;
};

[[noreturn]] void non_finite(const TrainRay& r, const RayRenderResult& out) {
  std::ostringstream s;
  s << "non-finite loss on ray origin (" << r.ray.origin.transpose() << ") direction (" << r.ray.direction.transpose()
    << "): color (" << out.color.transpose() << ") depth " << out.depth << " transparency " << out.transparency;
  throw NumericError(s.str());
}

// Forward (and optionally backward) for one ray. Scales are the loss weights
// divided by their normalizers.
RayLoss process_ray(const TrainRay& r, const VoxelField& field, const Vec3& background, const FieldNetwork& net,
                    const RenderConfig& render, double color_scale, double reg_scale, double depth_scale,
                    GradientBuffer* grads, std::vector<VoxelHit>& hits) {
  intersect_grid(r.ray, field.grid, hits);
  std::mt19937_64 rng(r.seed);
  const RayRenderResult out =
      render_ray(r.ray, hits, field.grid, field.table, net, render, background, render.jitter ? &rng : nullptr,
                 grads != nullptr);
  RayLoss loss;
  const Vec3 diff = out.color - r.target;
  loss.color = diff.squaredNorm();
  loss.reg = beta_regularizer(out.transparency);
  loss.has_depth = std::isfinite(r.depth);
  loss.depth = loss.has_depth ? std::abs(out.depth - r.depth) : 0.0;
  loss.evals = out.eval_count;
  if (!std::isfinite(loss.color) || !std::isfinite(loss.reg) || !std::isfinite(loss.depth)) non_finite(r, out);
  if (grads) {
    const Vec3 d_color = 2.0 * color_scale * diff;
    const double d_trans = reg_scale * beta_regularizer_derivative(out.transparency);
    double d_depth = 0.0;
    if (loss.has_depth && out.depth != r.depth) d_depth = depth_scale * (out.depth > r.depth ? 1.0 : -1.0);
    render_ray_backward(out, net, d_color, d_depth, d_trans, *grads);
  }
  return loss;
}

struct Scales {
  double color, reg, depth;
};

Scales loss_scales(std::span<const TrainRay> batch, const LossConfig& cfg) {
  std::size_t with_depth = 0;
  for (const TrainRay& r : batch) with_depth += std::isfinite(r.depth) ? 1 : 0;
  const double n = static_cast<double>(batch.size());
  return {1.0 / (3.0 * n), cfg.lambda_reg / n, with_depth ? cfg.depth_weight / static_cast<double>(with_depth) : 0.0};
}

LossTerms combine(const std::vector<RayLoss>& per_ray, const LossConfig& cfg) {
  LossTerms t;
  t.rays = per_ray.size();
  std::size_t with_depth = 0;
  for (const RayLoss& r : per_ray) {
    t.color += r.color;
    t.regularizer += r.reg;
    t.depth += r.depth;
    with_depth += r.has_depth ? 1 : 0;
    t.evals += static_cast<std::uint64_t>(r.evals);
  }
  const double n = static_cast<double>(std::max<std::size_t>(per_ray.size(), 1));
  t.color /= 3.0 * n;
  t.regularizer /= n;
  t.depth = with_depth ? t.depth / static_cast<double>(with_depth) : 0.0;
  t.total = t.color + cfg.lambda_reg * t.regularizer + (with_depth ? cfg.depth_weight * t.depth : 0.0);
  if (!std::isfinite(t.total)) throw NumericError("non-finite batch loss");
  return t;
}

void check_batch(std::span<const TrainRay> batch, const LossConfig& cfg) {
  if (batch.empty()) throw InvalidArgument("loss_and_grads: empty batch");
  if (cfg.slots < 1) throw InvalidArgument("loss_and_grads: slots must be >= 1");
}

void check_gradients(const GradientBuffer& g) {
  if (!g.network.allFinite() || !g.background.allFinite())
    throw NumericError("non-finite gradient in network or background");
  for (double v : g.embeddings)
    if (!std::isfinite(v)) throw NumericError("non-finite gradient in voxel embeddings");
}

std::vector<std::int32_t> invert_map(std::span<const std::int32_t> old_to_new, std::size_t new_rows) {
  std::vector<std::int32_t> src(new_rows, -1);
  for (std::size_t r = 0; r < old_to_new.size(); ++r)
    if (old_to_new[r] >= 0) src[static_cast<std::size_t>(old_to_new[r])] = static_cast<std::int32_t>(r);
  return src;
}

struct SceneOptimizer {
  AdamState embeddings;
  AdamState background;
};

}  // namespace

void TrainConfig::validate() const {
  if (rays_per_image < 1 || images_per_batch < 1) throw InvalidArgument("TrainConfig: batch sizes must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be > 0");
  if (lambda_reg < 0.0 || depth_loss_weight < 0.0) throw InvalidArgument("TrainConfig: loss weights must be >= 0");
  if (prune_period < 1) throw InvalidArgument("TrainConfig: prune_period must be >= 1");
  if (total_steps < 0) throw InvalidArgument("TrainConfig: total_steps must be >= 0");
  for (std::size_t i = 0; i < subdivide_milestones.size(); ++i) {
    if (subdivide_milestones[i] < 1) throw InvalidArgument("TrainConfig: milestones must be positive");
    if (i > 0 && subdivide_milestones[i] <= subdivide_milestones[i - 1])
      throw InvalidArgument("TrainConfig: milestones must be strictly ascending");
  }
  if (!(step_ratio > 0.0)) throw InvalidArgument("TrainConfig: step_ratio must be > 0");
  if (max_resample < 0 || gradient_slots < 1 || log_every < 1) throw InvalidArgument("TrainConfig: invalid counts");
  if (prune.samples_per_axis < 2) throw InvalidArgument("TrainConfig: prune samples_per_axis must be >= 2");
}

double beta_regularizer(double a) {
  return std::log(0.1 + a) + std::log(1.1 - a) - std::log(0.1) - std::log(1.1);
}

double beta_regularizer_derivative(double a) { return 1.0 / (0.1 + a) - 1.0 / (1.1 - a); }

SceneSet initialize_scenes(const std::vector<Aabb>& bboxes, const FieldConfig& field, const TrainConfig& cfg,
                           std::mt19937_64& rng, int target_voxels, double embedding_stddev) {
  if (bboxes.empty()) throw InvalidArgument("initialize_scenes: no scenes");
  SceneSet set;
  set.network = FieldNetwork(field);
  set.network.initialize(rng);
  set.network.set_sigma_bias(cfg.initial_sigma_bias);
  for (const Aabb& box : bboxes) {
    SceneModel m;
    m.field.grid = init_from_bbox(box, target_voxels);
    m.field.table = EmbeddingTable(m.field.grid.num_corners(), field.embed_dim);
    m.field.table.randomize(rng, embedding_stddev);
    set.scenes.push_back(std::move(m));
  }
  set.step_size = set.scenes.front().field.grid.voxel_size() / cfg.step_ratio;
  return set;
}

Vec3 estimate_background(const PosedImageSet& data, const SparseVoxelGrid& grid, const Vec3& fallback) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  std::vector<VoxelHit> hits;
  for (const PosedImage& view : data.views) {
    for (int y = 0; y < view.camera.height; ++y) {
      for (int x = 0; x < view.camera.width; ++x) {
        intersect_grid(pixel_ray(view.camera, x + 0.5, y + 0.5), grid, hits);
        if (!hits.empty()) continue;
        sum += view.image.pixel(x, y);
        ++n;
      }
    }
  }
  return n == 0 ? fallback : Vec3(sum / static_cast<double>(n));
}

std::vector<TrainRay> sample_ray_batch(const PosedImageSet& data, const SparseVoxelGrid& grid, const TrainConfig& cfg,
                                       std::mt19937_64& rng) {
  if (data.views.empty()) throw InvalidArgument("sample_ray_batch: empty dataset");
  if (grid.empty()) throw InvalidArgument("sample_ray_batch: grid has no voxels");
  std::uniform_int_distribution<std::size_t> pick_view(0, data.views.size() - 1);
  std::vector<TrainRay> batch;
  batch.reserve(static_cast<std::size_t>(cfg.images_per_batch) * cfg.rays_per_image);
  std::vector<VoxelHit> hits;
  for (int i = 0; i < cfg.images_per_batch; ++i) {
    const PosedImage& view = data.views[pick_view(rng)];
    std::uniform_int_distribution<int> px(0, view.camera.width - 1), py(0, view.camera.height - 1);
    for (int j = 0; j < cfg.rays_per_image; ++j) {
      int x = 0, y = 0;
      Ray ray;
      bool hit = false;
      for (int attempt = 0; attempt <= cfg.max_resample && !hit; ++attempt) {
        x = px(rng);
        y = py(rng);
        ray = pixel_ray(view.camera, x + 0.5, y + 0.5);
        intersect_grid(ray, grid, hits);
        hit = !hits.empty();
      }
      TrainRay r;
      r.ray = ray;
      r.target = view.image.pixel(x, y);
      if (view.depth) r.depth = view.depth->at(x, y);
      r.seed = rng();
      r.hits = hit;
      batch.push_back(r);
    }
  }
  return batch;
}

LossTerms loss_and_grads(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                         const FieldNetwork& net, const LossConfig& cfg, GradientBuffer& grads) {
  check_batch(batch, cfg);
  const RenderConfig render = training_render(cfg);
  const Scales sc = loss_scales(batch, cfg);
  const int slots = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.slots), batch.size()));
  std::vector<GradientBuffer> partial(static_cast<std::size_t>(slots));
  std::vector<RayLoss> per_ray(batch.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
  for (int s = 0; s < slots; ++s) {
    try {
      GradientBuffer& g = partial[static_cast<std::size_t>(s)];
      g.reset(net, field.table);
      std::vector<VoxelHit> hits;
      const std::size_t begin = batch.size() * static_cast<std::size_t>(s) / static_cast<std::size_t>(slots);
      const std::size_t end = batch.size() * static_cast<std::size_t>(s + 1) / static_cast<std::size_t>(slots);
      for (std::size_t i = begin; i < end; ++i)
        per_ray[i] = process_ray(batch[i], field, background, net, render, sc.color, sc.reg, sc.depth, &g, hits);
    } catch (...) {
#pragma omp critical(nsvf_loss_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  grads = std::move(partial[0]);
  for (int s = 1; s < slots; ++s) grads += partial[static_cast<std::size_t>(s)];
  check_gradients(grads);
  return combine(per_ray, cfg);
}

LossTerms loss_and_grads_serial(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                                const FieldNetwork& net, const LossConfig& cfg, GradientBuffer& grads) {
  check_batch(batch, cfg);
  const RenderConfig render = training_render(cfg);
  const Scales sc = loss_scales(batch, cfg);
  grads.reset(net, field.table);
  std::vector<RayLoss> per_ray(batch.size());
  std::vector<VoxelHit> hits;
  for (std::size_t i = 0; i < batch.size(); ++i)
    per_ray[i] = process_ray(batch[i], field, background, net, render, sc.color, sc.reg, sc.depth, &grads, hits);
  check_gradients(grads);
  return combine(per_ray, cfg);
}

LossTerms loss_value(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                     const FieldNetwork& net, const LossConfig& cfg) {
  check_batch(batch, cfg);
  const RenderConfig render = training_render(cfg);
  std::vector<RayLoss> per_ray(batch.size());
  std::vector<VoxelHit> hits;
  for (std::size_t i = 0; i < batch.size(); ++i)
    per_ray[i] = process_ray(batch[i], field, background, net, render, 0, 0, 0, nullptr, hits);
  return combine(per_ray, cfg);
}

TrainSummary train(SceneSet& set, const std::vector<const PosedImageSet*>& datasets, const TrainConfig& cfg,
                   std::mt19937_64& rng, const TrainHooks& hooks) {
  cfg.validate();
  if (set.scenes.empty() || datasets.size() != set.scenes.size())
    throw InvalidArgument("train: need one dataset per scene");
  for (const SceneModel& s : set.scenes)
    if (s.field.table.dim() != set.network.config().embed_dim)
      throw InvalidArgument("train: embedding dimension differs from the network");
  if (!(set.step_size > 0.0)) throw InvalidArgument("train: step size must be > 0");

  const auto start = std::chrono::steady_clock::now();
  const auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const std::size_t n_scenes = set.scenes.size();
  TrainSummary summary;
  for (const SceneModel& s : set.scenes) summary.initial_voxels.push_back(s.field.grid.num_cells());

  AdamState net_adam(set.network.num_parameters());
  std::vector<SceneOptimizer> opt(n_scenes);
  for (std::size_t i = 0; i < n_scenes; ++i) {
    opt[i].embeddings = AdamState(set.scenes[i].field.table.data().size());
    opt[i].background = AdamState(3);
  }
  const int first_milestone = cfg.subdivide_milestones.empty() ? cfg.prune_period : cfg.subdivide_milestones.front();
  const auto emit = [&](nlohmann::json j) {
    if (hooks.log) hooks.log(j);
  };

  LossConfig loss_cfg;
  loss_cfg.lambda_reg = cfg.lambda_reg;
  loss_cfg.depth_weight = cfg.depth_loss_weight;
  loss_cfg.slots = cfg.gradient_slots;
  GradientBuffer grads;

  for (int step = 0; step < cfg.total_steps; ++step) {
    if (step > 0 && step >= first_milestone && step % cfg.prune_period == 0) {
      for (std::size_t i = 0; i < n_scenes; ++i) {
        SceneModel& scene = set.scenes[i];
        PruneResult pr = prune(scene.field.grid, scene.field.table, set.network, cfg.prune);
        const std::size_t before = scene.field.grid.num_cells();
        if (hooks.on_prune) {
          PruneEvent ev{step, static_cast<int>(i), &scene.field, &pr.compacted.field, &set.network, scene.background,
                        set.step_size};
          hooks.on_prune(ev);
        }
        remap_rows(opt[i].embeddings, invert_map(pr.compacted.row_map, pr.compacted.field.table.rows()),
                   static_cast<std::size_t>(scene.field.table.dim()));
        scene.field = std::move(pr.compacted.field);
        emit({{"event", "prune"}, {"step", step}, {"scene", i}, {"voxels_before", before},
              {"voxels_after", scene.field.grid.num_cells()}, {"time", seconds()}});
        if (scene.field.grid.empty()) {
          std::ostringstream s;
          s << "all voxels pruned at step " << step << " (scene " << i << ", " << before
            << " voxels before pruning): every sampled density satisfied exp(-sigma) > " << cfg.prune.gamma
            << "; the targets are probably pure background";
          throw TrainingAborted(s.str());
        }
      }
      summary.prune_steps.push_back(step);
    }
    if (std::find(cfg.subdivide_milestones.begin(), cfg.subdivide_milestones.end(), step) !=
        cfg.subdivide_milestones.end()) {
      for (std::size_t i = 0; i < n_scenes; ++i) {
        SceneModel& scene = set.scenes[i];
        const std::size_t before = scene.field.grid.num_cells();
        SubdividedField sub = subdivide(scene.field.grid, scene.field.table);
        remap_rows(opt[i].embeddings, invert_map(sub.parent_row_map, sub.field.table.rows()),
                   static_cast<std::size_t>(scene.field.table.dim()));
        scene.field = std::move(sub.field);
        emit({{"event", "subdivide"}, {"step", step}, {"scene", i}, {"voxels_before", before},
              {"voxels_after", scene.field.grid.num_cells()}, {"voxel_size", scene.field.grid.voxel_size()},
              {"time", seconds()}});
      }
      set.step_size *= 0.5;
      summary.subdivide_steps.push_back(step);
      if (hooks.on_milestone) hooks.on_milestone(step, set);
    }

    const std::size_t k = static_cast<std::size_t>(step) % n_scenes;
    SceneModel& scene = set.scenes[k];
    const std::vector<TrainRay> batch = sample_ray_batch(*datasets[k], scene.field.grid, cfg, rng);
    loss_cfg.render.step_size = set.step_size;
    loss_cfg.render.z_max = cfg.z_max;
    loss_cfg.render.jitter = cfg.jitter;
    const LossTerms terms = loss_and_grads(batch, scene.field, scene.background, set.network, loss_cfg, grads);

    const double lr = linear_decay_lr(cfg.lr, step, cfg.total_steps);
    adam_step<double>(set.network.parameters(), {grads.network.data(), static_cast<std::size_t>(grads.network.size())},
                      net_adam, lr);
    adam_step<float>(scene.field.table.data(), grads.embeddings, opt[k].embeddings, lr);
    adam_step<double>({scene.background.data(), 3}, {grads.background.data(), 3}, opt[k].background, lr);
    scene.background = scene.background.cwiseMax(0.0).cwiseMin(1.0);

    if (step % cfg.log_every == 0 || step + 1 == cfg.total_steps) {
      std::size_t hit_rays = 0;
      for (const TrainRay& r : batch) hit_rays += r.hits ? 1 : 0;
      emit({{"step", step},
            {"scene", k},
            {"loss", terms.total},
            {"mse", terms.color},
            {"psnr", terms.color > 0 ? -10.0 * std::log10(terms.color) : 99.0},
            {"regularizer", terms.regularizer},
            {"depth", terms.depth},
            {"voxels", scene.field.grid.num_cells()},
            {"evals", terms.evals},
            {"hit_fraction", static_cast<double>(hit_rays) / static_cast<double>(batch.size())},
            {"lr", lr},
            {"step_size", set.step_size},
            {"time", seconds()}});
    }
    summary.steps = step + 1;
  }
  for (const SceneModel& s : set.scenes) summary.final_voxels.push_back(s.field.grid.num_cells());
  return summary;
}

TrainSummary train_multiscene(SceneSet& scenes, const std::vector<const PosedImageSet*>& datasets,
                              const TrainConfig& cfg, std::mt19937_64& rng, const TrainHooks& hooks) {
  if (scenes.scenes.size() < 2) throw InvalidArgument("train_multiscene: need at least two scenes");
  return train(scenes, datasets, cfg, rng, hooks);
}

RenderedImage render_scene(const SceneSet& set, int scene, const Camera& camera, double eps, double z_max) {
  const SceneModel& s = set.scenes.at(static_cast<std::size_t>(scene));
  RenderConfig cfg;
  cfg.step_size = set.step_size;
  cfg.early_stop_eps = eps;
  cfg.z_max = z_max;
  return render_image(camera, s.field.grid, s.field.table, set.network, cfg, s.background);
}

std::vector<ViewMetrics> evaluate_views(const SceneSet& set, int scene, const PosedImageSet& data, double eps,
                                        double z_max) {
  if (data.views.empty()) throw InvalidArgument("evaluate_views: empty split");
  std::vector<ViewMetrics> out;
  for (const PosedImage& v : data.views) {
    const RenderedImage r = render_scene(set, scene, v.camera, eps, z_max);
    out.push_back({psnr(r.rgb, v.image), ssim(r.rgb, v.image), r.total_evals()});
  }
  return out;
}

double mean_psnr(const std::vector<ViewMetrics>& m) {
  double s = 0.0;
  for (const ViewMetrics& v : m) s += v.psnr;
  return m.empty() ? 0.0 : s / static_cast<double>(m.size());
}

}  // namespace nsvf
