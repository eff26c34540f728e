// SPDX-License-Identifier: Apache-2.0
// Command-line front end; all work happens in pricestock::cli::run.
#include <iostream>
#include <utility>

#include <CLI11.hpp>

#include "pricestock/commands.hpp"
#include "pricestock/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Joint pricing and replenishment experiments"};
  app.require_subcommand(1);
  pricestock::cli::Options opts;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--preset", opts.preset, "preset name seeding the defaults");
    sub->add_option("--seed", seed, "run a single seed");
    sub->add_option("--out", opts.out, "output directory");
  };

  const std::pair<const char*, const char*> plain[] = {
      {"simulate", "roll out the configured policies and write trajectories"},
      {"sa-demo", "two-timescale stochastic approximation on the single-period problem"},
      {"benchmark", "compare policies across scenarios"},
      {"dp-oracle", "exact dynamic program for small lost-sales instances"},
      {"train-fsda", "train the fast-slow actor-critic agents"},
  };
  for (const auto& [name, about] : plain) common(app.add_subcommand(name, about));
  auto* search = app.add_subcommand("search-baseline", "grid search for bslp, ssp or myopic");
  common(search);
  search->add_option("--policy", opts.policy, "bslp, ssp, myopic or all");

  auto* fit = app.add_subcommand("fit-demand", "fit stationary demand curves to price,demand rows");
  fit->add_option("--csv", opts.csv, "input CSV with a price,demand header")->required();
  fit->add_option("--kind", opts.kind, "linear, exponential, iso-elasticity, logit or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << pricestock::cli::error_json(pricestock::Error(pricestock::ErrorKind::Config, e.what())) << "\n";
    return 2;
  }
  const CLI::App* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (const CLI::Option* flag = sub->get_option_no_throw("--seed"); flag && flag->count() > 0) opts.seed = seed;
  return pricestock::cli::run(opts, std::cout, std::cerr);
}
