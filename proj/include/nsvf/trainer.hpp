#pragma once

#include "nsvf/adam.hpp"
#include "nsvf/dataset.hpp"
#include "nsvf/field.hpp"
#include "nsvf/prune.hpp"
#include "nsvf/renderer.hpp"
#include "nsvf/voxel_grid.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsvf {

/// Raised when a loss or gradient turns non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when training cannot continue (e.g. every voxel was pruned).
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int rays_per_image = 2048;
  int images_per_batch = 4;
  double lr = 1e-3;  // decays linearly to zero at total_steps
  double lambda_reg = 0.01;
  double depth_loss_weight = 0.0;
  int prune_period = 500;
  std::vector<int> subdivide_milestones{1000, 3000};
  int total_steps = 5000;
  PruneOptions prune;
  double step_ratio = 8.0;  // initial tau = voxel_size / step_ratio
  double initial_sigma_bias = -2.0;  // density head bias at initialization
  bool jitter = true;
  double z_max = 10.0;
  int max_resample = 16;  // retries per ray of the biased sampler
  int gradient_slots = 8;  // fixed reduction order, independent of thread count
  int log_every = 50;

  void validate() const;
};

/// One scene: its voxel field and learnable background color.
struct SceneModel {
  VoxelField field;
  Vec3 background = Vec3::Constant(0.5);
};

/// Per-scene fields over one shared network.
struct SceneSet {
  std::vector<SceneModel> scenes;
  FieldNetwork network;
  double step_size = 0.0;  // current tau
};

/// Voxels tiling the bbox (target count), random embeddings and network.
SceneSet initialize_scenes(const std::vector<Aabb>& bboxes, const FieldConfig& field, const TrainConfig& cfg,
                           std::mt19937_64& rng, int target_voxels = 1000, double embedding_stddev = 0.01);

/// Mean color of the pixels whose rays miss the grid; `fallback` when none do.
Vec3 estimate_background(const PosedImageSet& data, const SparseVoxelGrid& grid,
                         const Vec3& fallback = Vec3::Constant(0.5));

/// A training ray with its supervision. depth is NaN when unknown.
struct TrainRay {
  Ray ray;
  Vec3 target = Vec3::Zero();
  double depth = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;  // jitter seed
  bool hits = false;       // intersected at least one voxel when drawn
};

/// Draws images_per_batch views, then rays_per_image pixels each. Pixels whose
/// ray misses every voxel are redrawn up to max_resample times, after which the
/// last draw is kept as a background ray. Throws when the grid is empty.
std::vector<TrainRay> sample_ray_batch(const PosedImageSet& data, const SparseVoxelGrid& grid, const TrainConfig& cfg,
                                       std::mt19937_64& rng);

struct LossConfig {
  RenderConfig render;  // early termination is always disabled here
  double lambda_reg = 0.01;
  double depth_weight = 0.0;
  int slots = 8;
};

struct LossTerms {
  double total = 0.0;
  double color = 0.0;        // mean squared error per channel
  double regularizer = 0.0;  // mean Omega(A)
  double depth = 0.0;        // mean |Z - Z*| over rays with depth
  std::uint64_t evals = 0;
  std::size_t rays = 0;
};

/// Omega(A) = log(0.1 + A) + log(1.1 - A) - log(0.1) - log(1.1).
double beta_regularizer(double a);
double beta_regularizer_derivative(double a);

/// Loss of the batch and its gradient (grads are overwritten). Rays are split
/// into cfg.slots contiguous groups processed in parallel; group buffers are
/// summed in order, so the result does not depend on the thread count.
LossTerms loss_and_grads(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                         const FieldNetwork& net, const LossConfig& cfg, GradientBuffer& grads);
/// Single-threaded reference; one buffer, rays in order.
LossTerms loss_and_grads_serial(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                                const FieldNetwork& net, const LossConfig& cfg, GradientBuffer& grads);
/// Forward only.
LossTerms loss_value(std::span<const TrainRay> batch, const VoxelField& field, const Vec3& background,
                     const FieldNetwork& net, const LossConfig& cfg);

/// Training event for hooks and logs.
struct PruneEvent {
  int step = 0;
  int scene = 0;
  const VoxelField* before = nullptr;
  const VoxelField* after = nullptr;
  const FieldNetwork* network = nullptr;
  Vec3 background = Vec3::Zero();
  double step_size = 0.0;
};

struct TrainHooks {
  std::function<void(const nlohmann::json&)> log;
  std::function<void(const PruneEvent&)> on_prune;
  std::function<void(int step, const SceneSet&)> on_milestone;
};

struct TrainSummary {
  int steps = 0;
  std::vector<std::size_t> initial_voxels;
  std::vector<std::size_t> final_voxels;
  std::vector<int> prune_steps;
  std::vector<int> subdivide_steps;
};

/// Progressive training of one scene (datasets.size() == 1) or several scenes
/// sharing the network, round-robin one scene per step.
TrainSummary train(SceneSet& scenes, const std::vector<const PosedImageSet*>& datasets, const TrainConfig& cfg,
                   std::mt19937_64& rng, const TrainHooks& hooks = {});

/// Same as train, requires at least two scenes.
TrainSummary train_multiscene(SceneSet& scenes, const std::vector<const PosedImageSet*>& datasets,
                              const TrainConfig& cfg, std::mt19937_64& rng, const TrainHooks& hooks = {});

/// Renders one scene of a set from a camera.
RenderedImage render_scene(const SceneSet& scenes, int scene, const Camera& camera, double eps,
                           double z_max = 10.0);

struct ViewMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
  std::uint64_t evals = 0;
};

/// Renders every view of `data` and scores it.
std::vector<ViewMetrics> evaluate_views(const SceneSet& scenes, int scene, const PosedImageSet& data, double eps,
                                        double z_max = 10.0);
double mean_psnr(const std::vector<ViewMetrics>& m);

}  // namespace nsvf
