#include <iostream>

#include "CLI11.hpp"
#include "mfoc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Coupled forward-backward control solver on the periodic cube"};
  app.require_subcommand(1);

  std::string config_path;
  std::string from_dir;

  auto* solve = app.add_subcommand("solve", "run the full pipeline from a config file");
  solve->add_option("config", config_path, "run configuration (JSON)")->required();

  auto* validate = app.add_subcommand("validate", "check the model hypotheses only");
  validate->add_option("config", config_path, "run configuration (JSON)")->required();

  auto* particles =
      app.add_subcommand("particles", "particle companion for a finished run");
  particles->add_option("config", config_path, "run configuration (JSON)")->required();
  particles->add_option("--from", from_dir, "run directory with stored trajectories")
      ->required();

  auto* probe = app.add_subcommand("probe", "variational probe of a stored control");
  probe->add_option("config", config_path, "run configuration (JSON)")->required();
  probe->add_option("--from", from_dir, "run directory with stored trajectories")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return mfoc::run(config_path);
    if (validate->parsed()) return mfoc::run_validate(config_path);
    if (particles->parsed()) return mfoc::run_particles(config_path, from_dir);
    if (probe->parsed()) return mfoc::run_probe(config_path, from_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
