// Command-line front end: region search, single-point checks, trace dumps
// and the exhaustive grid oracle for the lane-change study.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "decival/app.hpp"

namespace {

using decival::app::RunConfig;
using decival::traffic::ModelKind;

const std::map<std::string, ModelKind> kModels{
    {"constant-acceleration", ModelKind::constant_acceleration},
    {"high-validity", ModelKind::high_validity},
};

struct ModelNames {
  std::string surrogate = "constant-acceleration";
  std::string reference = "high-validity";
};

void add_common(CLI::App* cmd, RunConfig& c, ModelNames& m) {
  cmd->add_option("--scenario", c.scenario_path, "Scenario file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--surrogate-model", m.surrogate,
                  "Model standing in for the reference")
      ->check(CLI::IsMember(kModels));
  cmd->add_option("--reference-model", m.reference,
                  "Model treated as ground truth")
      ->check(CLI::IsMember(kModels));
  cmd->add_option("--cache", c.cache_path,
                  "Experiment cache (newline-delimited JSON), read and updated");
  cmd->add_flag("!--no-inference", c.inference,
                "Only reuse exact cache hits, no dominance inference");
}

void add_grid(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--out", c.out_dir, "Output directory");
  cmd->add_option("--step-p", c.step_p, "Position grid step (m)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--step-v", c.step_v, "Velocity grid step (m/s)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--step-a", c.step_a, "Acceleration grid step (m/s^2)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-evals", c.max_evals,
                  "Direct evaluation budget per car")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--car", c.cars, "Surrounding car index (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Validity regions of a constant-acceleration surrogate in a "
               "lane-change scenario"};
  app.require_subcommand(1);

  RunConfig config;
  ModelNames models;
  std::size_t car = 1;
  double p = 0.0, v = 0.0, a = 0.0;

  auto* search = app.add_subcommand("search", "Run the region search");
  add_common(search, config, models);
  add_grid(search, config);
  search->add_option("--tolerance", config.tolerance,
                     "Bisection tolerance on every axis")
      ->check(CLI::PositiveNumber);
  search->add_option("--workers", config.workers, "Cars searched in parallel")
      ->check(CLI::PositiveNumber);
  search->add_option("--seed", config.seed, "Reserved; results are deterministic");

  auto* check = app.add_subcommand("check-point", "Evaluate one car state");
  add_common(check, config, models);
  check->add_option("--car", car, "Surrounding car index")->required();
  check->add_option("--p", p, "Position relative to the ego (m)")->required();
  check->add_option("--v", v, "Velocity (m/s)")->required();
  check->add_option("--a", a, "Acceleration (m/s^2)")->required();

  auto* sim = app.add_subcommand("simulate", "Dump both models' traces");
  add_common(sim, config, models);
  sim->add_option("--out", config.out_dir, "Output directory");

  auto* oracle = app.add_subcommand("oracle", "Evaluate every grid point");
  add_common(oracle, config, models);
  add_grid(oracle, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : decival::app::kConfigError;
  }
  config.models.surrogate = kModels.at(models.surrogate);
  config.models.reference = kModels.at(models.reference);

  try {
    if (*search) return decival::app::run_search(config, std::cerr);
    if (*check) return decival::app::check_point(config, car, p, v, a, std::cout);
    if (*sim) return decival::app::simulate(config, std::cerr);
    if (*oracle) return decival::app::oracle(config, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return decival::app::exit_code_for(e);
  }
  return decival::app::kConfigError;
}
