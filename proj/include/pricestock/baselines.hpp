// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pricestock/demand_fit.hpp"
#include "pricestock/market.hpp"

namespace pricestock::baselines {

/// Base-stock list-price: order up to `base_stock` (inventory position), list
/// price at or below it, marked down by `markdown` per unit above it.
struct BSLPParams {
  int base_stock = 0;
  double list_price = 0.0;
  double markdown = 0.0;  // >= 0

  double price(double position) const;
};

/// (s, S, p): reorder up to S when on-hand stock drops below s; price
/// intercept + slope * on-hand.
struct SSPParams {
  int s = 0;
  int S = 1;
  double intercept = 0.0;
  double slope = 0.0;  // <= 0
};

/// Base-stock order on a weighted position on-hand + w * pipeline, price
/// intercept + slope * position.
struct MyopicParams {
  int base_stock = 0;
  double weight = 1.0;  // in [0, 1]
  double intercept = 0.0;
  double slope = 0.0;   // <= 0
};

using BaselineParams = std::variant<BSLPParams, SSPParams, MyopicParams>;

enum class PolicyKind { BSLP, SSP, Myopic };
std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);

/// Nearest grid price (lower one on ties) after clamping to the grid range.
double snap_price(const market::ScenarioConfig& config, double price);
/// Nearest grid quantity (lower on ties) after clamping to [q_min, q_max].
int snap_quantity(const market::ScenarioConfig& config, double quantity);

/// On-hand plus every outstanding order.
long inventory_position(const market::MarketState& state);

market::Action act_bslp(const BSLPParams& params, const market::MarketState& state,
                        const market::ScenarioConfig& config);
market::Action act_ssp(const SSPParams& params, const market::MarketState& state,
                       const market::ScenarioConfig& config);
market::Action act_myopic(const MyopicParams& params, const market::MarketState& state,
                          const market::ScenarioConfig& config);

market::Policy make_policy(const BaselineParams& params, const market::ScenarioConfig& config);

/// Uniform over both grids; draws from `rng`, which must outlive the policy.
market::Policy random_policy(const market::ScenarioConfig& config, Rng& rng);

/// Total reward of episode i on stream make_stream(seed, "eval", i); the
/// same streams drive fsda::evaluate, so policies share demand paths.
std::vector<double> evaluate_policy(const market::ScenarioConfig& config, const market::Policy& policy,
                                    int episodes, std::uint64_t seed);
/// As above for the random policy; its action draws use a separate stream.
std::vector<double> evaluate_random(const market::ScenarioConfig& config, int episodes, std::uint64_t seed);

struct SearchGrids {
  std::vector<int> stocks;     // base stock, s and S candidates
  std::vector<double> prices;  // list prices and price intercepts
  std::vector<double> slopes;  // markdown magnitudes (>= 0); applied as -slope where a slope is <= 0
  std::vector<double> weights; // myopic pipeline weights
};

/// y*, s, S over [0, (z+1) q_max] (at most 21 values), the scenario price grid,
/// five slopes in price-grid steps and weights {0, 0.5, 1}.
SearchGrids default_grids(const market::ScenarioConfig& config);

struct SearchConfig {
  int budget = 2000;        // candidate evaluations
  int episodes = 100;       // common-random-number episodes per candidate
  int fit_samples = 10000;  // (price, demand) pairs for the stationary fit
  std::uint64_t seed = 0;
  std::optional<SearchGrids> grids;

  void validate() const;
};

struct Candidate {
  BaselineParams params;
  std::size_t grid_index = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct SearchResult {
  PolicyKind kind = PolicyKind::BSLP;
  Candidate best;
  demand::FitResult fit;  // best r^2 among the kinds that could be fitted
  std::vector<Candidate> evaluated;
};

/// (price, demand) pairs from episodes of the uniform random policy.
std::vector<demand::PriceDemand> simulate_price_demand(const market::ScenarioConfig& config, int samples,
                                                       std::uint64_t seed);

/// Stage 1 fits a stationary demand curve to simulated pairs; stage 2 ranks
/// the grid candidates by a one-period profit proxy under that curve,
/// evaluates the top `budget` on common random numbers and returns the best
/// mean (first in grid order on ties).
SearchResult search_parameters(PolicyKind kind, const market::ScenarioConfig& config, const SearchConfig& search);

std::vector<std::string> param_header(PolicyKind kind);
std::vector<std::string> param_cells(const BaselineParams& params);

/// `<params...>,mean_return,std_return`, one row per evaluated candidate in grid order.
void write_search_csv(const std::string& path, const SearchResult& result);

}  // namespace pricestock::baselines
