#include "nsvf/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nsvf {
namespace {

constexpr std::size_t kInferenceChunk = 16;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void render_row(const Camera& camera, const PixelRenderer& render, std::uint64_t seed, int y, RenderedImage& out) {
  for (int x = 0; x < camera.width; ++x) {
    std::mt19937_64 rng(pixel_seed(seed, x, y));
    const PixelResult r = render(pixel_ray(camera, x + 0.5, y + 0.5), rng);
    out.rgb.set(x, y, r.color);
    out.depth.at(x, y) = static_cast<float>(r.depth);
    out.transparency.at(x, y) = static_cast<float>(r.transparency);
    out.evals.at(x, y) = static_cast<float>(r.eval_count);
  }
}

RenderedImage allocate(const Camera& camera) {
  validate_camera(camera);
  RenderedImage out;
  out.rgb = Image(camera.width, camera.height);
  out.depth = Raster(camera.width, camera.height);
  out.transparency = Raster(camera.width, camera.height);
  out.evals = Raster(camera.width, camera.height);
  return out;
}

PixelRenderer single_field_renderer(const SparseVoxelGrid& grid, const EmbeddingTable& table,
                                    const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg) {
  return [&grid, &table, &net, cfg, c_bg](const Ray& ray, std::mt19937_64& rng) {
    const RayRenderResult r = render_ray(ray, grid, table, net, cfg, c_bg, cfg.jitter ? &rng : nullptr, false);
    return PixelResult{r.color, r.depth, r.transparency, r.eval_count};
  };
}

}  // namespace

void RenderConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw InvalidArgument("RenderConfig: step_size must be > 0");
  if (!(early_stop_eps >= 0.0 && early_stop_eps < 1.0)) throw InvalidArgument("RenderConfig: eps must be in [0,1)");
  if (!(z_max > 0.0) || !std::isfinite(z_max)) throw InvalidArgument("RenderConfig: z_max must be > 0");
}

std::vector<RaySample> sample_ray(std::span<const VoxelHit> hits, const RenderConfig& cfg, std::mt19937_64* rng) {
  std::vector<RaySample> samples;
  if (hits.empty()) return samples;
  cfg.validate();
  if (cfg.jitter && rng == nullptr) throw InvalidArgument("sample_ray: jitter requires an rng");

  const double z_begin = hits.front().z_in;
  double z_end = z_begin;
  for (const VoxelHit& h : hits) z_end = std::max(z_end, h.z_out);

  std::vector<double> z;
  z.reserve(2 * hits.size() + static_cast<std::size_t>((z_end - z_begin) / cfg.step_size) + 2);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (long k = 0;; ++k) {
    const double base = z_begin + static_cast<double>(k) * cfg.step_size;
    if (!(base < z_end)) break;
    const double zk = base + (cfg.jitter ? uni(*rng) : 0.5) * cfg.step_size;
    if (zk < z_end) z.push_back(zk);
  }
  for (const VoxelHit& h : hits) {
    z.push_back(h.z_in);
    z.push_back(h.z_out);
  }
  std::sort(z.begin(), z.end());

  samples.reserve(z.size());
  std::size_t lo = 0;
  for (std::size_t j = 0; j + 1 < z.size(); ++j) {
    const double delta = z[j + 1] - z[j];
    if (!(delta > 0.0)) continue;
    const double mid = 0.5 * (z[j] + z[j + 1]);
    while (lo < hits.size() && hits[lo].z_out <= mid) ++lo;
    const VoxelHit* owner = nullptr;
    for (std::size_t i = lo; i < hits.size() && hits[i].z_in < mid; ++i) {
      const VoxelHit& h = hits[i];
      if (!(h.z_out > mid)) continue;
      if (!owner || h.instance < owner->instance || (h.instance == owner->instance && h.voxel_id < owner->voxel_id))
        owner = &h;
    }
    if (!owner) continue;
    samples.push_back({mid, delta, owner->voxel_id, owner->instance});
  }
  return samples;
}

MarchResult march(std::span<const RaySample> samples, const ChunkEvaluator& evaluate, double eps, const Vec3& c_bg,
                  double z_max, std::size_t chunk) {
  MarchResult r;
  double a = 1.0;
  if (chunk == 0) chunk = eps > 0.0 ? kInferenceChunk : samples.size();
  chunk = std::max<std::size_t>(chunk, 1);
  Eigen::VectorXd sigma;
  Eigen::MatrixXd color;
  for (std::size_t begin = 0; begin < samples.size() && !r.terminated_early; begin += chunk) {
    if (eps > 0.0 && !(a > eps)) {
      r.terminated_early = true;
      break;
    }
    const std::size_t end = std::min(samples.size(), begin + chunk);
    evaluate(samples.subspan(begin, end - begin), sigma, color);
    for (std::size_t j = begin; j < end; ++j) {
      if (eps > 0.0 && !(a > eps)) {
        r.terminated_early = true;
        break;
      }
      const RaySample& s = samples[j];
      const auto i = static_cast<Eigen::Index>(j - begin);
      const double alpha = std::exp(-sigma(i) * s.delta);
      const double w = a * (1.0 - alpha);
      r.color += w * color.col(i);
      r.depth += w * s.z_mid;
      a *= alpha;
      ++r.eval_count;
    }
  }
  r.color += a * c_bg;
  r.depth += a * z_max;
  r.transparency = a;
  return r;
}

RayRenderResult render_ray(const Ray& ray, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                           const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg, std::mt19937_64* rng,
                           bool keep_tape) {
  const std::vector<VoxelHit> hits = intersect_grid(ray, grid);
  return render_ray(ray, hits, grid, table, net, cfg, c_bg, rng, keep_tape);
}

RayRenderResult render_ray(const Ray& ray, std::span<const VoxelHit> hits, const SparseVoxelGrid& grid,
                           const EmbeddingTable& table, const FieldNetwork& net, const RenderConfig& cfg,
                           const Vec3& c_bg, std::mt19937_64* rng, bool keep_tape) {
  cfg.validate();
  RayRenderResult result;
  result.background = c_bg;
  result.z_max = cfg.z_max;
  std::vector<RaySample> samples = sample_ray(hits, cfg, rng);

  std::vector<FieldPoint> points;
  const auto to_points = [&](std::span<const RaySample> chunk) {
    points.resize(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const RaySample& s = chunk[i];
      points[i] = {s.voxel, grid.local_coords(s.voxel, ray.at(s.z_mid))};
    }
  };

  if (keep_tape) {
    RayTape& tape = result.tape;
    const ChunkEvaluator eval = [&](std::span<const RaySample> chunk, Eigen::VectorXd& sigma, Eigen::MatrixXd& color) {
      to_points(chunk);
      evaluate_field(grid, table, net, points, ray.direction, sigma, color, &tape.field);
      tape.sigma = sigma;
      tape.color = color;
    };
    const MarchResult m = march(samples, eval, cfg.early_stop_eps, c_bg, cfg.z_max, samples.size());
    tape.alpha.resize(tape.sigma.size());
    for (Eigen::Index j = 0; j < tape.sigma.size(); ++j)
      tape.alpha(j) = std::exp(-tape.sigma(j) * samples[static_cast<std::size_t>(j)].delta);
    tape.samples = std::move(samples);
    tape.recorded = true;
    result.color = m.color;
    result.depth = m.depth;
    result.transparency = m.transparency;
    result.eval_count = m.eval_count;
    result.terminated_early = m.terminated_early;
    return result;
  }

  const ChunkEvaluator eval = [&](std::span<const RaySample> chunk, Eigen::VectorXd& sigma, Eigen::MatrixXd& color) {
    to_points(chunk);
    evaluate_field(grid, table, net, points, ray.direction, sigma, color, nullptr);
  };
  const MarchResult m = march(samples, eval, cfg.early_stop_eps, c_bg, cfg.z_max);
  result.color = m.color;
  result.depth = m.depth;
  result.transparency = m.transparency;
  result.eval_count = m.eval_count;
  result.terminated_early = m.terminated_early;
  return result;
}

void render_ray_backward(const RayRenderResult& result, const FieldNetwork& net, const Vec3& d_color, double d_depth,
                         double d_transparency, GradientBuffer& grads) {
  if (result.terminated_early)
    throw TruncatedTapeError("render_ray_backward: forward pass terminated early; render with eps = 0 for training");
  const RayTape& tape = result.tape;
  if (!tape.recorded) throw TruncatedTapeError("render_ray_backward: no tape recorded for this ray");
  const auto n = static_cast<Eigen::Index>(tape.samples.size());
  if (tape.sigma.size() != n || tape.alpha.size() != n || tape.color.cols() != n)
    throw TruncatedTapeError("render_ray_backward: no tape recorded for this ray");

  const double a_final = result.transparency;
  grads.background += a_final * d_color;
  if (n == 0) return;

  // Transparency before each sample.
  Eigen::VectorXd a_before(n);
  double a = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    a_before(j) = a;
    a *= tape.alpha(j);
  }

  Eigen::VectorXd d_sigma(n);
  Eigen::MatrixXd d_col(3, n);
  // Suffix sums of color/depth contributions behind sample j, background included.
  Vec3 rest_color = a_final * result.background;
  double rest_depth = a_final * result.z_max;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    const double alpha = tape.alpha(j);
    const double a_after = a_before(j) * alpha;
    const double w = a_before(j) * (1.0 - alpha);
    const double delta = tape.samples[static_cast<std::size_t>(j)].delta;
    const double z = tape.samples[static_cast<std::size_t>(j)].z_mid;
    const Vec3 c = tape.color.col(j);
    d_sigma(j) = delta * (d_color.dot(a_after * c - rest_color) + d_depth * (a_after * z - rest_depth) -
                          d_transparency * a_final);
    d_col.col(j) = w * d_color;
    rest_color += w * c;
    rest_depth += w * z;
  }
  backward_field(tape.field, net, d_sigma, d_col, grads);
}

std::uint64_t RenderedImage::total_evals() const {
  std::uint64_t total = 0;
  for (float v : evals.data) total += static_cast<std::uint64_t>(v);
  return total;
}

std::uint64_t pixel_seed(std::uint64_t seed, int x, int y) {
  return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x)));
}

RenderedImage render_pixels(const Camera& camera, const PixelRenderer& render, std::uint64_t seed) {
  RenderedImage out = allocate(camera);
#pragma omp parallel for schedule(dynamic, 1)
  for (int y = 0; y < camera.height; ++y) render_row(camera, render, seed, y, out);
  return out;
}

RenderedImage render_pixels_serial(const Camera& camera, const PixelRenderer& render, std::uint64_t seed) {
  RenderedImage out = allocate(camera);
  for (int y = 0; y < camera.height; ++y) render_row(camera, render, seed, y, out);
  return out;
}

RenderedImage render_image(const Camera& camera, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                           const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg, std::uint64_t seed) {
  return render_pixels(camera, single_field_renderer(grid, table, net, cfg, c_bg), seed);
}

RenderedImage render_image_serial(const Camera& camera, const SparseVoxelGrid& grid, const EmbeddingTable& table,
                                  const FieldNetwork& net, const RenderConfig& cfg, const Vec3& c_bg,
                                  std::uint64_t seed) {
  return render_pixels_serial(camera, single_field_renderer(grid, table, net, cfg, c_bg), seed);
}

}  // namespace nsvf
