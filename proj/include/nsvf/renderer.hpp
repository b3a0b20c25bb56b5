#pragma once

#include "nsvf/field.hpp"
#include "nsvf/geometry.hpp"
#include "nsvf/image.hpp"
#include "nsvf/traversal.hpp"
#include "nsvf/voxel_grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace nsvf {

struct RenderConfig {
  double step_size = 0.025;     // tau
  double early_stop_eps = 0.01; // epsilon; 0 disables early termination
  double z_max = 10.0;          // background depth
  bool jitter = false;          // uniform jitter inside each tau-bin

  void validate() const;
};

/// A midpoint-rule sample: midpoint z, interval length, owning voxel.
struct RaySample {
  double z_mid = 0.0;
  double delta = 0.0;
  int voxel = 0;
  int instance = 0;
};

/// Stratified points with step tau anchored at the first entry distance,
/// merged with every hit boundary. Consecutive pairs give midpoints and
/// intervals; pairs with zero length or whose midpoint is in no hit are
/// dropped. Jitter draws from `rng` (required when cfg.jitter is set).
std::vector<RaySample> sample_ray(std::span<const VoxelHit> hits, const RenderConfig& cfg,
                                  std::mt19937_64* rng = nullptr);

/// Per-sample record kept for the backward pass.
struct RayTape {
  bool recorded = false;
  std::vector<RaySample> samples;
  Eigen::VectorXd sigma;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd color;  // 3 x N
  FieldTape field;
};

struct RayRenderResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double transparency = 1.0;
  int eval_count = 0;
  bool terminated_early = false;
  Vec3 background = Vec3::Zero();
  double z_max = 0.0;
  RayTape tape;
};

/// Raised when the backward pass is asked to run on an incomplete tape.
class TruncatedTapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fills sigma (N) and color (3 x N) for a chunk of samples.
using ChunkEvaluator =
    std::function<void(std::span<const RaySample>, Eigen::VectorXd& sigma, Eigen::MatrixXd& color)>;

struct MarchResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double transparency = 1.0;
  int eval_count = 0;
  bool terminated_early = false;
};

/// Front-to-back accumulation over sorted samples with background compositing.
/// With eps > 0, stops before a sample once transparency <= eps; samples are
/// evaluated in chunks (chunk = 0: 16 with eps > 0, all samples otherwise) so
/// the field is not queried far past termination.
MarchResult march(std::span<const RaySample> samples, const ChunkEvaluator& evaluate, double eps, const Vec3& c_bg,
                  double z_max, std::size_t chunk = 0);

/// Renders one ray. With keep_tape the full sample tape is recorded.
RayRenderResult render_ray(const Ray& ray, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                           const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg,
                           std::mt19937_64* rng = nullptr, bool keep_tape = false);

/// Same, reusing precomputed hits for the ray.
RayRenderResult render_ray(const Ray& ray, std::span<const VoxelHit> hits, const SparseVoxelGrid& grid,
                           const EmbeddingTable& table, const FieldNetwork& net, const RenderConfig& cfg,
                           const Vec3& c_bg, std::mt19937_64* rng, bool keep_tape);

/// Reverse pass through the accumulation and every field query. Accumulates
/// into grads (network, embeddings, background). Throws TruncatedTapeError if
/// the forward pass stopped early or kept no tape.
void render_ray_backward(const RayRenderResult& result, const FieldNetwork& net, const Vec3& d_color,
                         double d_depth, double d_transparency, GradientBuffer& grads);

struct RenderedImage {
  Image rgb;
  Raster depth;
  Raster transparency;
  Raster evals;

  std::uint64_t total_evals() const;
};

/// Result of one pixel for render_pixels.
struct PixelResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double transparency = 1.0;
  int eval_count = 0;
};

/// Renders a pixel from its camera ray; rng is seeded per pixel.
using PixelRenderer = std::function<PixelResult(const Ray& ray, std::mt19937_64& rng)>;

/// Renders every pixel center, rows distributed over OpenMP threads.
RenderedImage render_pixels(const Camera& camera, const PixelRenderer& render, std::uint64_t seed = 0);
/// Single-threaded reference of render_pixels.
RenderedImage render_pixels_serial(const Camera& camera, const PixelRenderer& render, std::uint64_t seed = 0);

RenderedImage render_image(const Camera& camera, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                           const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg,
                           std::uint64_t seed = 0);
RenderedImage render_image_serial(const Camera& camera, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                                  const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg,
                                  std::uint64_t seed = 0);

/// Seed for pixel (x, y); stable across thread counts.
std::uint64_t pixel_seed(std::uint64_t seed, int x, int y);

/// Screen-space normals from central differences of back-projected depth.
struct NormalMap {
  Image visualization;        // (n + 1) / 2 per channel, black where invalid
  std::vector<Vec3> normals;  // row-major, zero where invalid
  std::vector<bool> valid;
};

/// Pixels whose own or neighbouring transparency exceeds `background_threshold`
/// are masked, as are image borders.
NormalMap normal_map(const Raster& depth, const Raster& transparency, const Camera& camera,
                     double background_threshold = 0.99);

}  // namespace nsvf
