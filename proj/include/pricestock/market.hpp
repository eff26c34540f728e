// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pricestock/demand.hpp"
#include "pricestock/rng.hpp"

namespace pricestock::market {

enum class ShortageMode { LostSales, Backlog };

struct CostParams {
  double holding = 0.0;   // h, per unit of ending inventory
  double shortage = 0.0;  // b, per lost (or backlogged) unit
  double ordering = 0.0;  // c, per unit ordered
  double fixed = 0.0;     // f, per order placed when fixed costs are enabled
  int lead_time = 0;      // z, periods

  void validate() const;
};

struct ScenarioConfig {
  ShortageMode mode = ShortageMode::LostSales;
  bool fixed_cost = false;
  int horizon = 20;
  double discount = 1.0;
  std::vector<double> prices;   // ascending action grid
  std::vector<int> quantities;  // ascending action grid, non-negative
  demand::DemandModel demand = demand::LinearizedDemandParams{};
  demand::CompetitorStrategy competitor;
  double reference_smoothing = 0.5;
  CostParams costs;
  int initial_inventory = 0;
  std::optional<double> initial_competitor_price;  // default: grid midpoint
  std::optional<double> initial_reference_price;   // default: grid midpoint
  int inventory_bound = 0;  // feature scale for encode_state; 0 = automatic
  int demand_bound = 0;     // feature scale for encode_state; 0 = automatic

  void validate() const;
  double min_price() const { return prices.front(); }
  double max_price() const { return prices.back(); }
  int max_quantity() const { return quantities.back(); }
  double mid_price() const { return prices[prices.size() / 2]; }
  int effective_inventory_bound() const;
  int effective_demand_bound() const;
};

/// `count` evenly spaced values over [lo, hi].
std::vector<double> linspace(double lo, double hi, std::size_t count);
std::vector<int> int_range(int lo, int hi, int step = 1);

struct MarketState {
  long inventory = 0;          // ending inventory of the previous period (< 0 = backlog)
  std::vector<int> pipeline;   // outstanding orders, oldest first, length = lead time
  long last_demand = 0;
  double last_price = 0.0;
  double competitor_price = 0.0;
  double reference_price = 0.0;
  long last_lost = 0;
  int period = 0;

  bool operator==(const MarketState&) const = default;
};

struct Action {
  double price = 0.0;
  int quantity = 0;

  bool operator==(const Action&) const = default;
};

struct StepOutcome {
  long demand = 0;
  long sales = 0;
  long lost = 0;  // lost sales, or backlogged units in backlog mode
  long ending_inventory = 0;
  double reward = 0.0;
  MarketState next_state;
};

MarketState reset(const ScenarioConfig& config);

/// Poisson rate of this period's demand given the state and the posted price.
double period_rate(const ScenarioConfig& config, const MarketState& state, const Action& action);

/// Advances one period with an externally supplied demand realization.
/// `rng` is only consumed by a randomizing competitor.
StepOutcome step_with_demand(const ScenarioConfig& config, const MarketState& state,
                             const Action& action, long demand, Rng& rng);

/// Samples demand from the configured model, then advances one period.
StepOutcome step(const ScenarioConfig& config, const MarketState& state, const Action& action, Rng& rng);

/// r = p S - h I^+ - b L - c q - f 1{q > 0}; the fixed term only when enabled.
double period_reward(const ScenarioConfig& config, double price, long sales, long ending_inventory,
                     long lost, int quantity);

using Policy = std::function<Action(const MarketState&)>;

struct TrajectoryStep {
  MarketState state;
  Action action;
  StepOutcome outcome;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double total_reward = 0.0;
  double discounted_return = 0.0;  // sum_t gamma^(t-1) r_t, t = 1..T
};

Trajectory run_episode(const ScenarioConfig& config, const Policy& policy, Rng& rng);

/// [I, L, d, p, o, j, pipeline..., t/T]; counts are divided by their bound and
/// clamped to [0, 1] (inventory to [-1, 1] under backlog), prices are mapped
/// affinely onto [0, 1] over the price grid.
Eigen::VectorXd encode_state(const MarketState& state, const ScenarioConfig& config);
int encoded_size(const ScenarioConfig& config);

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);

}  // namespace pricestock::market
