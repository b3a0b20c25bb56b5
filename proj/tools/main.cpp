#include "cli_support.hpp"
#include "commands.hpp"
#include "nsvf/edit_script.hpp"
#include "nsvf/trainer.hpp"

#include <omp.h>

#include <iostream>

using namespace nsvf;
using namespace nsvf::cli;

int main(int argc, char** argv) {
  CLI::App app{"Sparse voxel neural fields: synthesize, train, render, evaluate, edit and compose"};
  app.name("nsvf");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: available parallelism)")
      ->check(CLI::NonNegativeNumber);

  SyntheticOptions synthetic;
  TrainOptions train;
  RenderOptions render;
  EvalOptions eval;
  EditOptions edit;
  ComposeOptions compose;
  add_make_synthetic(app, synthetic);
  add_train(app, train);
  add_render(app, render);
  add_eval(app, eval);
  add_edit(app, edit);
  add_compose(app, compose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (threads > 0) omp_set_num_threads(threads);

  Invocation inv;
  inv.argv.assign(argv, argv + argc);
  inv.app = &app;
  inv.command = app.get_subcommands().front();
  const std::string name = inv.command->get_name();
  try {
    if (name == "make-synthetic") return run_make_synthetic(synthetic, inv);
    if (name == "train") return run_train(train, inv);
    if (name == "render") return run_render(render, inv);
    if (name == "eval") return run_eval(eval, inv);
    if (name == "edit") return run_edit(edit, inv);
    if (name == "compose") return run_compose(compose, inv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const EditScriptError& e) {
    std::cerr << "edit script error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const TrainingAborted& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  std::cerr << "unknown command " << name << "\n";
  return kOther;
}
