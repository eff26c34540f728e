// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pricestock/config.hpp"

namespace pricestock::cli {

struct Options {
  std::string command;
  std::string config_path;            // --config
  std::string preset;                 // --preset, applied before the config file
  std::optional<std::uint64_t> seed;  // --seed replaces the seed list
  std::string out;                    // --out replaces the output directory
  std::string csv;                    // fit-demand input
  std::string kind = "all";           // fit-demand model class
  std::string policy = "all";         // search-baseline policy kind
};

/// Preset (default "small"), then the config file on top, then --seed/--out.
config::ExperimentConfig resolve_config(const Options& options);

/// Held-out evaluation root for a training/search seed; disjoint streams from
/// everything a seed drives during training or search.
std::uint64_t heldout_seed(std::uint64_t seed);

// Each command writes its files under config.output and a JSON report to `out`.
void cmd_simulate(const config::ExperimentConfig& config, std::ostream& out);
void cmd_sa_demo(const config::ExperimentConfig& config, std::ostream& out);
void cmd_benchmark(const config::ExperimentConfig& config, std::ostream& out);
void cmd_dp_oracle(const config::ExperimentConfig& config, std::ostream& out);
void cmd_train_fsda(const config::ExperimentConfig& config, std::ostream& out);
void cmd_search_baseline(const config::ExperimentConfig& config, const std::string& policy, std::ostream& out);
void cmd_fit_demand(const std::string& csv_path, const std::string& kind, std::ostream& out);

/// {"error": "<kind>", "message": "..."}
std::string error_json(const std::exception& error);

/// Dispatches `options.command`; prints error JSON to `err` and returns a
/// nonzero code on failure.
int run(const Options& options, std::ostream& out, std::ostream& err);

}  // namespace pricestock::cli
