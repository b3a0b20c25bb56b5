#include "commands.hpp"

#include "cli_support.hpp"
#include "nsvf/edit_script.hpp"
#include "nsvf/metrics.hpp"
#include "nsvf/oracle.hpp"
#include "nsvf/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace nsvf::cli {
namespace {

std::string numbered(int i, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d%s", i, suffix);
  return buf;
}

json option_snapshot(const CLI::App& command) {
  json j = json::object();
  for (const CLI::Option* o : command.get_options()) {
    if (o->get_lnames().empty()) continue;
    const std::string& name = o->get_lnames().front();
    if (name == "help") continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      j[name] = r.size() == 1 ? json(r.front()) : json(r);
    } else {
      j[name] = o->get_default_str();
    }
  }
  return j;
}

RunManifest start_manifest(const Invocation& inv) {
  RunManifest m;
  m.command = inv.command ? inv.command->get_name() : "";
  m.argv = inv.argv;
  if (inv.command) m.config = option_snapshot(*inv.command);
  m.code_version = NSVF_CODE_VERSION;
  return m;
}

void add_camera_options(CLI::App& sub, CameraOptions& c) {
  sub.add_option("--poses", c.poses, "Dataset split whose cameras are rendered");
  sub.add_option("--orbit", c.orbit, "Number of orbit poses (used without --poses)")->check(CLI::NonNegativeNumber);
  sub.add_option("--res", c.resolution, "Orbit image resolution")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--fov", c.fov, "Orbit field of view in degrees")->capture_default_str();
  sub.add_option("--distance", c.distance, "Orbit camera distance from the scene center")->capture_default_str();
  sub.add_option("--elevation", c.elevation, "Orbit elevation in degrees")->capture_default_str();
}

std::vector<Camera> cameras_for(const CameraOptions& c, const CompositeScene& scene) {
  if (!c.poses.empty()) {
    const PosedImageSet set = load_dataset(c.poses);
    std::vector<Camera> cams;
    for (const PosedImage& v : set.views) cams.push_back(v.camera);
    return cams;
  }
  if (c.orbit < 1) throw ConfigError("give --poses or --orbit N");
  const Aabb b = composite_bounds(scene);
  return orbit_cameras(0.5 * (b.min + b.max), c.distance, c.elevation, c.orbit, c.resolution, c.fov);
}

struct OutputFlags {
  bool depth = false;
  bool normals = false;
  bool count_evals = false;
};

json render_all(const CompositeScene& scene, const std::vector<Camera>& cams, const RenderConfig& cfg,
                const OutputFlags& flags, const fs::path& out) {
  json images = json::array();
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const int k = static_cast<int>(i);
    const RenderedImage r = render_composite(scene, cams[i], cfg);
    write_png(r.rgb, out / numbered(k, ".png"));
    json rec = {{"index", k}, {"image", numbered(k, ".png")}};
    if (flags.depth) {
      write_raster(r.depth, out / numbered(k, "_depth.raw"));
      rec["depth"] = numbered(k, "_depth.raw");
    }
    if (flags.normals) {
      write_png(normal_map(r.depth, r.transparency, cams[i]).visualization, out / numbered(k, "_normal.png"));
      rec["normals"] = numbered(k, "_normal.png");
    }
    if (flags.count_evals) {
      write_raster(r.evals, out / numbered(k, "_evals.raw"));
      rec["evals_raster"] = numbered(k, "_evals.raw");
    }
    rec["evals"] = r.total_evals();
    total += r.total_evals();
    images.push_back(rec);
  }
  return {{"images", images}, {"total_evals", total}};
}

CompositeScene load_scene(const std::string& path, int scene_filter) {
  const Checkpoint ckpt = load_checkpoint(path);
  CompositeScene scene = composite_from_checkpoint(ckpt);
  if (scene_filter >= 0) {
    std::vector<FieldInstance> kept;
    for (const FieldInstance& i : scene.instances)
      if (i.scene == scene_filter) kept.push_back(i);
    if (kept.empty()) throw ConfigError("checkpoint has no instance for scene " + std::to_string(scene_filter));
    scene.instances = std::move(kept);
    scene.background = scene.instances.front().background;
  }
  return scene;
}

std::vector<int> parse_milestones(const std::string& text) {
  std::vector<int> out;
  if (text.empty() || text == "none") return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--milestones expects comma-separated integers or 'none', got '" + text + "'");
    }
  }
  return out;
}

Checkpoint to_checkpoint(const SceneSet& set, const json& metadata) {
  Checkpoint ckpt;
  for (std::size_t i = 0; i < set.scenes.size(); ++i)
    ckpt.instances.push_back({set.scenes[i].field, RigidTransform::identity(), set.scenes[i].background,
                              static_cast<int>(i)});
  ckpt.network = set.network;
  ckpt.step_size = set.step_size;
  ckpt.metadata = metadata;
  return ckpt;
}

json bbox_json(const Aabb& b) { return {{b.min.x(), b.min.y(), b.min.z()}, {b.max.x(), b.max.y(), b.max.z()}}; }

json metrics_report(const std::vector<ViewMetrics>& m) {
  json images = json::array();
  double sp = 0.0, ss = 0.0;
  std::uint64_t evals = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double p = report_psnr(m[i].psnr);
    images.push_back({{"index", i}, {"psnr", p}, {"ssim", m[i].ssim}, {"evals", m[i].evals}});
    sp += p;
    ss += m[i].ssim;
    evals += m[i].evals;
  }
  const double n = static_cast<double>(m.size());
  return {{"images", images}, {"mean_psnr", sp / n}, {"mean_ssim", ss / n}, {"total_evals", evals}};
}

}  // namespace

// ---------------------------------------------------------------- make-synthetic

void add_make_synthetic(CLI::App& app, SyntheticOptions& o) {
  CLI::App* sub = app.add_subcommand("make-synthetic", "Render a dataset of a built-in scene with the analytic oracle");
  sub->add_option("--scene", o.scene, "sphere | sphere_box | empty")->capture_default_str();
  sub->add_option("--res", o.resolution, "Image resolution (>= 16)")->capture_default_str();
  sub->add_option("--train", o.n_train, "Training views")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--test", o.n_test, "Test views")->capture_default_str()->check(CLI::NonNegativeNumber);
  sub->add_option("--seed", o.seed, "Camera sampling seed")->capture_default_str();
  sub->add_option("--distance", o.distance, "Camera distance from the bbox center")->capture_default_str();
  sub->add_option("--fov", o.fov, "Field of view in degrees")->capture_default_str();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--force", o.force, "Allow a non-empty output directory");
}

int run_make_synthetic(const SyntheticOptions& o, const Invocation& inv) {
  if (o.resolution < 16) throw ConfigError("--res must be at least 16");
  if (o.n_train + o.n_test < 1) throw ConfigError("need at least one view");
  const OracleScene scene = builtin_scene(o.scene);
  const fs::path out = o.out;
  prepare_output_dir(out, o.force);
  RunManifest manifest = start_manifest(inv);
  manifest.seed = o.seed;
  manifest.outputs = {{"train", "train"}, {"test", "test"}};
  manifest.write(out / "manifest.json");

  OracleDatasetOptions opt;
  opt.n_train = o.n_train;
  opt.n_test = o.n_test;
  opt.resolution = o.resolution;
  opt.camera_distance = o.distance;
  opt.fov_degrees = o.fov;
  std::mt19937_64 rng(o.seed);
  const auto [train, test] = generate_oracle_dataset(scene, opt, rng);
  if (!train.views.empty()) save_dataset(train, out / "train");
  if (!test.views.empty()) save_dataset(test, out / "test");
  std::cout << "wrote " << train.views.size() << " train and " << test.views.size() << " test views to " << out.string()
            << " (hash " << hex64(hash_directory(out / (train.views.empty() ? "test" : "train"))) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- train

void add_train(CLI::App& app, TrainOptions& o) {
  CLI::App* sub = app.add_subcommand("train", "Train voxel fields from posed images");
  sub->add_option("--data", o.data, "Dataset directory (repeat for multi-scene training)")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--force", o.force, "Allow a non-empty output directory");
  sub->add_option("--seed", o.seed, "Random seed (required)")->required();
  sub->add_option("--steps", o.steps, "Total optimization steps")->capture_default_str();
  sub->add_option("--rays-per-image", o.rays_per_image, "Rays sampled per image")->capture_default_str();
  sub->add_option("--images-per-batch", o.images_per_batch, "Images per batch")->capture_default_str();
  sub->add_option("--lr", o.lr, "Initial learning rate (linear decay)")->capture_default_str();
  sub->add_option("--lambda", o.lambda_reg, "Transparency regularizer weight")->capture_default_str();
  sub->add_option("--depth-weight", o.depth_weight, "Depth loss weight")->capture_default_str();
  sub->add_option("--prune-period", o.prune_period, "Steps between pruning passes")->capture_default_str();
  sub->add_option("--milestones", o.milestones, "Subdivision steps, comma separated, or 'none'")->capture_default_str();
  sub->add_option("--voxels", o.voxels, "Initial voxel count target")->capture_default_str();
  sub->add_option("--step-ratio", o.step_ratio, "Initial voxel size / marching step")->capture_default_str();
  sub->add_option("--sigma-bias", o.sigma_bias, "Initial density head bias (pre-softplus)")->capture_default_str();
  sub->add_flag("--no-jitter", o.no_jitter, "Disable sample jitter");
  sub->add_option("--prune-samples", o.prune_samples, "Pruning lattice samples per axis")->capture_default_str();
  sub->add_option("--gamma", o.gamma, "Pruning threshold")->capture_default_str();
  sub->add_option("--embed-dim", o.embed_dim, "Voxel embedding size")->capture_default_str();
  sub->add_option("--hidden", o.hidden, "MLP width")->capture_default_str();
  sub->add_option("--feature-freqs", o.feature_freqs, "Feature encoding frequencies")->capture_default_str();
  sub->add_option("--dir-freqs", o.direction_freqs, "Direction encoding frequencies")->capture_default_str();
  sub->add_option("--density-layers", o.density_layers, "Hidden layers before the density head")->capture_default_str();
  sub->add_option("--color-layers", o.color_layers, "Hidden layers in the color branch")->capture_default_str();
  sub->add_option("--activation", o.activation, "relu | softplus")->capture_default_str();
  sub->add_option("--gradient-slots", o.gradient_slots, "Fixed gradient reduction groups")->capture_default_str();
  sub->add_option("--log-every", o.log_every, "Steps between log records")->capture_default_str();
  sub->add_option("--eval-eps", o.eval_eps, "Early termination threshold for the final evaluation")->capture_default_str();
  sub->add_flag("--no-eval", o.no_eval, "Skip the held-out evaluation");
  sub->add_flag("--quiet", o.quiet, "Do not echo log records");
}

int run_train(const TrainOptions& o, const Invocation& inv) {
  TrainConfig cfg;
  cfg.rays_per_image = o.rays_per_image;
  cfg.images_per_batch = o.images_per_batch;
  cfg.lr = o.lr;
  cfg.lambda_reg = o.lambda_reg;
  cfg.depth_loss_weight = o.depth_weight;
  cfg.prune_period = o.prune_period;
  cfg.subdivide_milestones = parse_milestones(o.milestones);
  cfg.total_steps = o.steps;
  cfg.prune.samples_per_axis = o.prune_samples;
  cfg.prune.gamma = o.gamma;
  cfg.step_ratio = o.step_ratio;
  cfg.initial_sigma_bias = o.sigma_bias;
  cfg.jitter = !o.no_jitter;
  cfg.gradient_slots = o.gradient_slots;
  cfg.log_every = o.log_every;
  cfg.validate();
  FieldConfig field;
  field.embed_dim = o.embed_dim;
  field.hidden = o.hidden;
  field.feature_freqs = o.feature_freqs;
  field.direction_freqs = o.direction_freqs;
  field.density_layers = o.density_layers;
  field.color_layers = o.color_layers;
  if (o.activation == "relu") {
    field.hidden_activation = Activation::kRelu;
  } else if (o.activation == "softplus") {
    field.hidden_activation = Activation::kSoftplus;
  } else {
    throw ConfigError("--activation must be relu or softplus");
  }
  if (o.voxels < 1) throw ConfigError("--voxels must be >= 1");
  FieldNetwork probe(field);  // validates the architecture before any I/O

  std::vector<DatasetDirs> dirs;
  for (const std::string& d : o.data) dirs.push_back(locate_splits(d));
  std::vector<PosedImageSet> train_sets, test_sets;
  std::vector<bool> has_test;
  for (const DatasetDirs& d : dirs) {
    train_sets.push_back(load_dataset(d.train));
    has_test.push_back(d.test.has_value());
    test_sets.push_back(d.test ? load_dataset(*d.test) : PosedImageSet{});
  }

  const fs::path out = o.out;
  prepare_output_dir(out, o.force);
  RunManifest manifest = start_manifest(inv);
  manifest.seed = o.seed;
  for (const DatasetDirs& d : dirs) {
    manifest.dataset_hashes[d.train.string()] = hex64(hash_directory(d.train));
    if (d.test) manifest.dataset_hashes[d.test->string()] = hex64(hash_directory(*d.test));
  }
  manifest.outputs = {{"log", "train_log.jsonl"}, {"initial", "init.nsvf"}, {"final", "final.nsvf"},
                      {"metrics", "metrics.json"}, {"milestones", "ckpt_stepNNNNNN.nsvf"}};
  manifest.write(out / "manifest.json");

  std::mt19937_64 rng(o.seed);
  std::vector<Aabb> boxes;
  for (const PosedImageSet& s : train_sets) boxes.push_back(s.bbox);
  SceneSet set = initialize_scenes(boxes, field, cfg, rng, o.voxels);
  for (std::size_t i = 0; i < set.scenes.size(); ++i)
    set.scenes[i].background = estimate_background(train_sets[i], set.scenes[i].field.grid);
  json meta = {{"bbox", json::array()}, {"step", 0}, {"code_version", manifest.code_version}};
  for (const Aabb& b : boxes) meta["bbox"].push_back(bbox_json(b));
  save_checkpoint(to_checkpoint(set, meta), out / "init.nsvf");

  std::ofstream log(out / "train_log.jsonl");
  if (!log) throw IoError("cannot write " + (out / "train_log.jsonl").string());
  TrainHooks hooks;
  hooks.log = [&](const json& j) {
    log << j.dump() << '\n';
    if (!o.quiet) std::cout << j.dump() << std::endl;
  };
  hooks.on_milestone = [&](int step, const SceneSet& s) {
    meta["step"] = step;
    char name[40];
    std::snprintf(name, sizeof name, "ckpt_step%06d.nsvf", step);
    save_checkpoint(to_checkpoint(s, meta), out / name);
  };
  std::vector<const PosedImageSet*> data;
  for (const PosedImageSet& s : train_sets) data.push_back(&s);
  const TrainSummary summary = set.scenes.size() > 1 ? train_multiscene(set, data, cfg, rng, hooks)
                                                     : train(set, data, cfg, rng, hooks);
  log.flush();
  meta["step"] = summary.steps;
  save_checkpoint(to_checkpoint(set, meta), out / "final.nsvf");

  json metrics = {{"steps", summary.steps},
                  {"initial_voxels", summary.initial_voxels},
                  {"final_voxels", summary.final_voxels},
                  {"scenes", json::array()}};
  if (!o.no_eval) {
    for (std::size_t i = 0; i < set.scenes.size(); ++i) {
      if (!has_test[i] || test_sets[i].views.empty()) continue;
      const json rep = metrics_report(evaluate_views(set, static_cast<int>(i), test_sets[i], o.eval_eps));
      metrics["scenes"].push_back({{"scene", i}, {"test", rep}});
      std::cout << "scene " << i << ": test PSNR " << rep["mean_psnr"].get<double>() << " dB, SSIM "
                << rep["mean_ssim"].get<double>() << ", voxels " << set.scenes[i].field.grid.num_cells() << "\n";
    }
  }
  write_json(metrics, out / "metrics.json");
  return kOk;
}

// ---------------------------------------------------------------- render

void add_render(CLI::App& app, RenderOptions& o) {
  CLI::App* sub = app.add_subcommand("render", "Render a checkpoint from dataset poses or an orbit");
  sub->add_option("--ckpt", o.checkpoint, "Checkpoint file")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--force", o.force, "Allow a non-empty output directory");
  add_camera_options(*sub, o.camera);
  sub->add_option("--eps", o.eps, "Early termination threshold (0 disables)")->capture_default_str();
  sub->add_option("--step-size", o.step_size, "Marching step (default: checkpoint value)");
  sub->add_option("--scene", o.scene, "Render only instances of this scene id");
  sub->add_flag("--depth", o.depth, "Also write depth rasters");
  sub->add_flag("--normals", o.normals, "Also write normal maps");
  sub->add_flag("--count-evals", o.count_evals, "Also write per-pixel field evaluation counts");
}

int run_render(const RenderOptions& o, const Invocation& inv) {
  CompositeScene scene = load_scene(o.checkpoint, o.scene);
  if (o.step_size > 0.0) scene.step_size = o.step_size;
  const std::vector<Camera> cams = cameras_for(o.camera, scene);
  const fs::path out = o.out;
  prepare_output_dir(out, o.force);
  RunManifest manifest = start_manifest(inv);
  manifest.outputs = {{"summary", "render.json"}};
  manifest.write(out / "manifest.json");
  RenderConfig cfg;
  cfg.early_stop_eps = o.eps;
  const json summary = render_all(scene, cams, cfg, {o.depth, o.normals, o.count_evals}, out);
  write_json(summary, out / "render.json");
  std::cout << "rendered " << cams.size() << " views";
  if (o.count_evals) std::cout << ", " << summary["total_evals"].get<std::uint64_t>() << " field evaluations";
  std::cout << "\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

void add_eval(CLI::App& app, EvalOptions& o) {
  CLI::App* sub = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint or of rendered images against a split");
  auto* ck = sub->add_option("--ckpt", o.checkpoint, "Checkpoint to render");
  auto* pr = sub->add_option("--pred", o.predictions, "Directory of NNNN.png predictions");
  ck->excludes(pr);
  sub->add_option("--data", o.data, "Ground-truth split (or a dataset root with test/)")->required();
  sub->add_option("--eps", o.eps, "Early termination threshold")->capture_default_str();
  sub->add_option("--scene", o.scene, "Scene id within the checkpoint");
  sub->add_option("--report", o.report, "Write the JSON report here instead of stdout");
}

int run_eval(const EvalOptions& o, const Invocation& inv) {
  (void)inv;
  if (o.checkpoint.empty() == o.predictions.empty()) throw ConfigError("give exactly one of --ckpt or --pred");
  fs::path split = o.data;
  if (fs::is_directory(split / "test")) split /= "test";
  const PosedImageSet truth = load_dataset(split);
  if (truth.views.empty()) throw ConfigError("split " + split.string() + " has no images");
  std::vector<ViewMetrics> m;
  if (!o.checkpoint.empty()) {
    const CompositeScene scene = load_scene(o.checkpoint, o.scene);
    RenderConfig cfg;
    cfg.early_stop_eps = o.eps;
    for (const PosedImage& v : truth.views) {
      const RenderedImage r = render_composite(scene, v.camera, cfg);
      m.push_back({psnr(r.rgb, v.image), ssim(r.rgb, v.image), r.total_evals()});
    }
  } else {
    for (std::size_t i = 0; i < truth.views.size(); ++i) {
      const Image pred = read_png(fs::path(o.predictions) / numbered(static_cast<int>(i), ".png"));
      const Image& gt = truth.views[i].image;
      if (pred.width != gt.width || pred.height != gt.height)
        throw ConfigError("prediction " + numbered(static_cast<int>(i), ".png") + " is " + std::to_string(pred.width) +
                          "x" + std::to_string(pred.height) + ", ground truth is " + std::to_string(gt.width) + "x" +
                          std::to_string(gt.height));
      m.push_back({psnr(pred, gt), ssim(pred, gt), 0});
    }
  }
  const json report = metrics_report(m);
  if (o.report.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    write_json(report, o.report);
  }
  return kOk;
}

// ---------------------------------------------------------------- edit

void add_edit(CLI::App& app, EditOptions& o) {
  CLI::App* sub = app.add_subcommand("edit", "Apply an edit script to a checkpoint");
  sub->add_option("--ckpt", o.checkpoint, "Input checkpoint")->required();
  sub->add_option("--script", o.script, "Edit script")->required();
  sub->add_option("--out", o.out, "Output checkpoint")->required();
}

int run_edit(const EditOptions& o, const Invocation& inv) {
  (void)inv;
  const std::vector<EditOp> ops = load_edit_script(o.script);
  const Checkpoint in = load_checkpoint(o.checkpoint);
  CompositeScene scene = composite_from_checkpoint(in);
  apply_edits(scene, ops);
  save_checkpoint(checkpoint_from_composite(scene, in.metadata), o.out);
  std::cout << "applied " << ops.size() << " operations; " << scene.instances.size() << " instances\n";
  return kOk;
}

// ---------------------------------------------------------------- compose

void add_compose(CLI::App& app, ComposeOptions& o) {
  CLI::App* sub = app.add_subcommand("compose", "Render several checkpoints placed in one scene");
  sub->add_option("--ckpt", o.checkpoints, "Checkpoint (repeatable)")->required();
  sub->add_option("--transform", o.transforms, "Placement 'tx ty tz [rx ry rz]', one per --ckpt");
  sub->add_option("--background", o.background, "Background color override (r g b)")->expected(3);
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_flag("--force", o.force, "Allow a non-empty output directory");
  add_camera_options(*sub, o.camera);
  sub->add_option("--eps", o.eps, "Early termination threshold")->capture_default_str();
  sub->add_flag("--depth", o.depth, "Also write depth rasters");
  sub->add_flag("--normals", o.normals, "Also write normal maps");
  sub->add_flag("--count-evals", o.count_evals, "Also write per-pixel field evaluation counts");
}

int run_compose(const ComposeOptions& o, const Invocation& inv) {
  if (!o.transforms.empty() && o.transforms.size() != o.checkpoints.size())
    throw ConfigError("give one --transform per --ckpt (or none)");
  CompositeScene scene;
  for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
    const CompositeScene part = composite_from_checkpoint(load_checkpoint(o.checkpoints[i]));
    const RigidTransform t = o.transforms.empty() ? RigidTransform::identity() : parse_transform(o.transforms[i]);
    for (FieldInstance inst : part.instances) {
      inst.transform = t * inst.transform;
      scene.instances.push_back(std::move(inst));
    }
    if (i == 0) {
      scene.background = part.background;
      scene.step_size = part.step_size;
    } else {
      scene.step_size = std::min(scene.step_size, part.step_size);
    }
  }
  if (!o.background.empty()) scene.background = Vec3(o.background[0], o.background[1], o.background[2]);
  const std::vector<Camera> cams = cameras_for(o.camera, scene);
  const fs::path out = o.out;
  prepare_output_dir(out, o.force);
  RunManifest manifest = start_manifest(inv);
  manifest.outputs = {{"summary", "render.json"}};
  manifest.write(out / "manifest.json");
  RenderConfig cfg;
  cfg.early_stop_eps = o.eps;
  write_json(render_all(scene, cams, cfg, {o.depth, o.normals, o.count_evals}, out), out / "render.json");
  std::cout << "rendered " << cams.size() << " views of " << scene.instances.size() << " instances\n";
  return kOk;
}

}  // namespace nsvf::cli
