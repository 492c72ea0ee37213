#include "afafed/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace afafed;
  CLI::App app{"Asynchronous fair adaptive federated learning simulator"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "override sim.seed");
  };

  auto* run = app.add_subcommand("run", "simulate and write metrics.csv + summary.ini");
  add_common(run);
  auto* profile = app.add_subcommand("profile", "run, then estimate the bound parameters");
  add_common(profile);

  std::string params;
  auto* bound = app.add_subcommand("bound", "evaluate the convergence bounds");
  bound->add_option("--config,params", params, "bound parameter file ([bound] section)")
      ->required()
      ->check(CLI::ExistingFile);
  bound->add_option("--out", out, "ignored; accepted for symmetry");

  std::string seeds = "1";
  std::vector<std::string> grid;
  auto* sweep = app.add_subcommand("sweep", "seed x parameter grid, one summary per cell");
  add_common(sweep);
  sweep->add_option("--seeds", seeds, "seed list, e.g. 1-20 or 1,5,9");
  sweep->add_option("--grid", grid, "key=v1,v2 (repeatable; use ';' between list values)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bound) return command_bound(params, std::cout);
    ExperimentConfig cfg = load_config(config);
    if (seed) cfg.seed = *seed;
    if (*run) return command_run(cfg, out);
    if (*profile) return command_profile(cfg, out);
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    for (const auto& g : grid) axes.push_back(parse_grid_axis(g));
    return command_sweep(cfg, out, parse_seed_list(seeds), axes);
  } catch (const NumericDivergence& e) {
    std::cerr << "aborted: " << e.what() << " (coworker " << e.coworker() << ", time "
              << e.virtual_time() << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 1;
}
