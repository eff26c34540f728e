// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pricestock/analytic.hpp"
#include "pricestock/baselines.hpp"
#include "pricestock/fsda.hpp"
#include "pricestock/market.hpp"
#include "pricestock/sa.hpp"

namespace pricestock::config {

struct DPSettings {
  double tail_tolerance = 1e-12;
  double budget = 1e8;
  int demand_cap = 0;
};

/// Everything a CLI run needs. A `preset` seeds the defaults; a config file
/// overrides individual keys on top of it.
struct ExperimentConfig {
  std::string preset = "small";
  market::ScenarioConfig scenario;
  analytic::SinglePeriodProblem single_period;
  std::vector<double> single_period_prices;  // enumeration grid for the analytic cross-checks
  sa::SAConfig sa;
  fsda::FSDAConfig fsda;
  baselines::SearchConfig search;
  DPSettings dp;
  std::vector<std::string> policies;  // zero, random, bslp, ssp, myopic, fsda
  std::vector<std::uint64_t> seeds;
  int eval_episodes = 100;
  std::string output = "out";
  std::vector<std::string> benchmark_scenarios;  // preset names

  void validate() const;
};

std::vector<std::string> preset_names();
/// Throws Error(Config) for an unknown name.
ExperimentConfig preset(std::string_view name);

/// Canonical form: sorted keys, two-space indent, trailing newline.
std::string dump_config(const ExperimentConfig& config);

/// Unknown keys and wrong value types raise Error(Config); malformed JSON
/// raises Error(Parse).
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

}  // namespace pricestock::config
