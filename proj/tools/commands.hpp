#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nsvf::cli {

struct CameraOptions {
  std::string poses;  // dataset split providing cameras
  int orbit = 0;      // number of orbit poses when no dataset is given
  int resolution = 64;
  double fov = 50.0;
  double distance = 3.2;
  double elevation = 30.0;
};

struct RenderOptions {
  std::string checkpoint;
  std::string out;
  bool force = false;
  CameraOptions camera;
  double eps = 0.01;
  double step_size = 0.0;  // 0: checkpoint value
  int scene = -1;          // -1: every instance
  bool depth = false;
  bool normals = false;
  bool count_evals = false;
};

struct SyntheticOptions {
  std::string scene = "sphere";
  int resolution = 64;
  int n_train = 30;
  int n_test = 10;
  std::uint64_t seed = 0;
  double distance = 3.2;
  double fov = 50.0;
  std::string out;
  bool force = false;
};

struct TrainOptions {
  std::vector<std::string> data;
  std::string out;
  bool force = false;
  std::uint64_t seed = 0;
  int steps = 5000;
  int rays_per_image = 2048;
  int images_per_batch = 4;
  double lr = 1e-3;
  double lambda_reg = 0.01;
  double depth_weight = 0.0;
  int prune_period = 500;
  std::string milestones = "1000,3000";
  int voxels = 1000;
  double step_ratio = 8.0;
  double sigma_bias = -2.0;
  bool no_jitter = false;
  int prune_samples = 16;
  double gamma = 0.5;
  int embed_dim = 32;
  int hidden = 128;
  int feature_freqs = 6;
  int direction_freqs = 4;
  int density_layers = 2;
  int color_layers = 2;
  std::string activation = "relu";
  int gradient_slots = 8;
  int log_every = 50;
  double eval_eps = 0.01;
  bool no_eval = false;
  bool quiet = false;
};

struct EvalOptions {
  std::string checkpoint;
  std::string predictions;  // directory of NNNN.png instead of a checkpoint
  std::string data;
  double eps = 0.01;
  int scene = -1;
  std::string report;  // empty: stdout
};

struct EditOptions {
  std::string checkpoint;
  std::string script;
  std::string out;
};

struct ComposeOptions {
  std::vector<std::string> checkpoints;
  std::vector<std::string> transforms;
  std::vector<double> background;
  std::string out;
  bool force = false;
  CameraOptions camera;
  double eps = 0.01;
  bool depth = false;
  bool normals = false;
  bool count_evals = false;
};

struct Invocation {
  std::vector<std::string> argv;
  const CLI::App* app = nullptr;
  const CLI::App* command = nullptr;
};

void add_make_synthetic(CLI::App& app, SyntheticOptions& o);
void add_train(CLI::App& app, TrainOptions& o);
void add_render(CLI::App& app, RenderOptions& o);
void add_eval(CLI::App& app, EvalOptions& o);
void add_edit(CLI::App& app, EditOptions& o);
void add_compose(CLI::App& app, ComposeOptions& o);

int run_make_synthetic(const SyntheticOptions& o, const Invocation& inv);
int run_train(const TrainOptions& o, const Invocation& inv);
int run_render(const RenderOptions& o, const Invocation& inv);
int run_eval(const EvalOptions& o, const Invocation& inv);
int run_edit(const EditOptions& o, const Invocation& inv);
int run_compose(const ComposeOptions& o, const Invocation& inv);

}  // namespace nsvf::cli
