// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "pricestock/analytic.hpp"
#include "pricestock/market.hpp"

namespace pricestock::dp {

/// Finite-horizon lost-sales instance with price-only demand rates.
struct DPInstance {
  int horizon = 1;
  double discount = 1.0;
  std::vector<double> prices;
  std::vector<int> quantities;
  std::vector<double> rates;  // Poisson rate per price index
  market::CostParams costs;
  bool fixed_cost = false;
  int initial_inventory = 0;
  double tail_tolerance = 1e-12;
  int demand_cap = 0;        // > 0: largest demand value kept; the tail is lumped into it
  double budget = 1e8;       // value updates

  void validate() const;

  /// Freezes competitor and reference prices at their reset values, so the
  /// scenario must not move them (fixed competitor, zero smoothing) unless
  /// its demand model ignores them.
  static DPInstance from_scenario(const market::ScenarioConfig& config);
  /// T = 1, z = 0; quantities are the order sizes reaching every integer stock
  /// level in the problem's stock domain.
  static DPInstance single_period(const analytic::SinglePeriodProblem& problem, const std::vector<double>& prices);
};

/// pmf[price][d] for d = 0..support-1 with the tail mass folded into the last point.
struct DemandTable {
  int support = 0;
  std::vector<std::vector<double>> pmf;
};

DemandTable demand_table(const DPInstance& instance);

/// Mixed-radix index over (inventory, pipeline quantity indices).
class StateIndexer {
 public:
  StateIndexer() = default;
  StateIndexer(int max_inventory, int lead_time, int quantity_count);

  int size() const { return size_; }
  int max_inventory() const { return max_inventory_; }
  int lead_time() const { return lead_time_; }
  int encode(int inventory, const std::vector<int>& pipeline_indices) const;
  int inventory(int index) const { return index % (max_inventory_ + 1); }
  std::vector<int> pipeline(int index) const;

 private:
  int max_inventory_ = 0;
  int lead_time_ = 0;
  int quantity_count_ = 1;
  int size_ = 1;
};

/// Actions per period and state; -1 marks states never visited by the tables' owner.
struct PolicyTable {
  std::vector<std::vector<int>> price_index;
  std::vector<std::vector<int>> quantity_index;
};

struct DPSolution {
  StateIndexer states;
  std::vector<std::vector<double>> value;  // value[t][state], t = 0..T-1
  PolicyTable policy;
  double initial_value = 0.0;
  int initial_state = 0;
  int demand_support = 0;
  double updates = 0.0;  // (state, price, quantity, demand) terms evaluated
};

/// Number of value updates backward_induction will perform.
double planned_updates(const DPInstance& instance);
/// sum_{t=1..T} (P Q D)^t: size of the full history tree.
double tree_cost(int prices, int quantities, int demand_support, int horizon);

/// Bellman recursion with V_{T+1} = 0; ties go to the lowest price index,
/// then the lowest quantity index. Throws a size error over budget.
DPSolution backward_induction(const DPInstance& instance);

/// Exact expected discounted return of `policy` from the initial state.
double evaluate_policy(const DPInstance& instance, const PolicyTable& policy);

struct TreeResult {
  double value = 0.0;
  double updates = 0.0;
};

/// Expectimax over the full history tree, no state merging. Cost grows as
/// tree_cost(); only for tiny instances.
TreeResult tree_expectimax(const DPInstance& instance);

/// `t,inventory,pipeline,value,price,quantity`, one row per state and period.
void write_solution_csv(const std::string& path, const DPInstance& instance, const DPSolution& solution);

}  // namespace pricestock::dp
