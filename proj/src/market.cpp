// SPDX-License-Identifier: Apache-2.0
#include "pricestock/market.hpp"

#include <algorithm>
#include <cmath>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"

namespace pricestock::market {

void CostParams::validate() const {
  require(holding >= 0.0 && shortage >= 0.0 && ordering >= 0.0 && fixed >= 0.0, ErrorKind::Config,
          "costs h, b, c, f must be non-negative");
  require(lead_time >= 0, ErrorKind::Config, "lead time must be non-negative");
}

void ScenarioConfig::validate() const {
  costs.validate();
  require(horizon >= 1, ErrorKind::Config, "horizon must be >= 1");
  require(discount > 0.0 && discount <= 1.0, ErrorKind::Config, "discount must lie in (0, 1]");
  require(!prices.empty(), ErrorKind::Config, "price grid is empty");
  require(!quantities.empty(), ErrorKind::Config, "quantity grid is empty");
  for (std::size_t i = 1; i < prices.size(); ++i)
    require(prices[i] > prices[i - 1], ErrorKind::Config, "price grid must be strictly increasing");
  for (std::size_t i = 1; i < quantities.size(); ++i)
    require(quantities[i] > quantities[i - 1], ErrorKind::Config, "quantity grid must be strictly increasing");
  require(quantities.front() >= 0, ErrorKind::Config, "quantity grid must be non-negative");
  require(reference_smoothing >= 0.0 && reference_smoothing <= 1.0, ErrorKind::Config,
          "reference smoothing must lie in [0, 1]");
  require(initial_inventory >= 0 || mode == ShortageMode::Backlog, ErrorKind::Config,
          "initial inventory must be >= 0 under lost sales");
  competitor.validate();
  if (const auto* lin = std::get_if<demand::LinearizedDemandParams>(&demand)) lin->validate(min_price(), max_price());
  if (const auto* log = std::get_if<demand::LogisticDemandParams>(&demand)) log->validate();
  if (const auto* emp = std::get_if<demand::EmpiricalDemandTable>(&demand)) emp->validate();
}

int ScenarioConfig::effective_inventory_bound() const {
  if (inventory_bound > 0) return inventory_bound;
  return std::max(1, max_quantity() * (costs.lead_time + 2));
}

int ScenarioConfig::effective_demand_bound() const {
  if (demand_bound > 0) return demand_bound;
  return std::max(1, 2 * max_quantity());
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  require(count >= 1, ErrorKind::Config, "linspace: count must be >= 1");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  out.back() = hi;
  return out;
}

std::vector<int> int_range(int lo, int hi, int step) {
  require(step > 0 && lo <= hi, ErrorKind::Config, "int_range: need lo <= hi and step > 0");
  std::vector<int> out;
  for (int v = lo; v <= hi; v += step) out.push_back(v);
  return out;
}

MarketState reset(const ScenarioConfig& config) {
  config.validate();
  MarketState s;
  s.inventory = config.initial_inventory;
  s.pipeline.assign(static_cast<std::size_t>(config.costs.lead_time), 0);
  s.last_price = config.mid_price();
  s.competitor_price = config.initial_competitor_price.value_or(config.mid_price());
  s.reference_price = config.initial_reference_price.value_or(config.mid_price());
  return s;
}

double period_rate(const ScenarioConfig& config, const MarketState& state, const Action& action) {
  return demand::rate(config.demand, {action.price, state.competitor_price, state.reference_price});
}

double period_reward(const ScenarioConfig& config, double price, long sales, long ending_inventory,
                     long lost, int quantity) {
  const auto& k = config.costs;
  double r = price * static_cast<double>(sales) - k.holding * static_cast<double>(std::max(ending_inventory, 0L)) -
             k.shortage * static_cast<double>(lost) - k.ordering * static_cast<double>(quantity);
  if (config.fixed_cost && quantity > 0) r -= k.fixed;
  return r;
}

namespace {
void check_action(const ScenarioConfig& config, const Action& action) {
  constexpr double slack = 1e-9;
  require(action.price >= config.min_price() - slack && action.price <= config.max_price() + slack,
          ErrorKind::Domain, "action price outside the price grid range");
  require(action.quantity >= 0 && action.quantity <= config.max_quantity(), ErrorKind::Domain,
          "action quantity outside [0, q_max]");
}
}  // namespace

StepOutcome step_with_demand(const ScenarioConfig& config, const MarketState& state,
                             const Action& action, long demand, Rng& rng) {
  check_action(config, action);
  require(demand >= 0, ErrorKind::Domain, "demand must be non-negative");
  StepOutcome out;
  out.demand = demand;
  MarketState next = state;

  // The order placed z periods ago arrives now; with z = 0 the new order does.
  long arriving = action.quantity;
  if (!next.pipeline.empty()) {
    arriving = next.pipeline.front();
    next.pipeline.erase(next.pipeline.begin());
    next.pipeline.push_back(action.quantity);
  }

  if (config.mode == ShortageMode::LostSales) {
    const long on_hand = state.inventory + arriving;
    out.sales = std::min(demand, on_hand);
    out.lost = std::max(demand - on_hand, 0L);
    out.ending_inventory = std::max(on_hand - demand, 0L);
  } else {
    // Backlog: physical stock serves carried backlog first, then new demand.
    const long physical = std::max(state.inventory, 0L) + arriving;
    const long owed = std::max(-state.inventory, 0L) + demand;
    out.sales = std::min(physical, owed);
    out.ending_inventory = state.inventory + arriving - demand;
    out.lost = std::max(-out.ending_inventory, 0L);
  }
  out.reward = period_reward(config, action.price, out.sales, out.ending_inventory, out.lost, action.quantity);

  next.inventory = out.ending_inventory;
  next.last_demand = demand;
  next.last_lost = out.lost;
  next.last_price = action.price;
  next.competitor_price = demand::competitor_next_price(config.competitor, action.price, state.competitor_price, rng);
  next.reference_price = demand::update_reference_price(state.reference_price, action.price,
                                                        state.competitor_price, config.reference_smoothing);
  next.period = state.period + 1;
  out.next_state = std::move(next);
  return out;
}

StepOutcome step(const ScenarioConfig& config, const MarketState& state, const Action& action, Rng& rng) {
  check_action(config, action);
  const long d = demand::sample_demand(period_rate(config, state, action), rng);
  return step_with_demand(config, state, action, d, rng);
}

Trajectory run_episode(const ScenarioConfig& config, const Policy& policy, Rng& rng) {
  Trajectory traj;
  MarketState state = reset(config);
  traj.steps.reserve(static_cast<std::size_t>(config.horizon));
  double weight = 1.0;
  for (int t = 0; t < config.horizon; ++t) {
    const Action action = policy(state);
    StepOutcome outcome = step(config, state, action, rng);
    traj.total_reward += outcome.reward;
    traj.discounted_return += weight * outcome.reward;
    weight *= config.discount;
    MarketState next = outcome.next_state;
    traj.steps.push_back({std::move(state), action, std::move(outcome)});
    state = std::move(next);
  }
  return traj;
}

int encoded_size(const ScenarioConfig& config) { return 7 + config.costs.lead_time; }

Eigen::VectorXd encode_state(const MarketState& state, const ScenarioConfig& config) {
  const double inv_bound = config.effective_inventory_bound();
  const double dem_bound = config.effective_demand_bound();
  const double q_bound = std::max(1, config.max_quantity());
  const double p_lo = config.min_price();
  const double p_span = std::max(config.max_price() - p_lo, 1e-12);
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  auto price = [&](double p) { return unit((p - p_lo) / p_span); };

  Eigen::VectorXd v(encoded_size(config));
  const double inv = static_cast<double>(state.inventory) / inv_bound;
  v(0) = config.mode == ShortageMode::Backlog ? std::clamp(inv, -1.0, 1.0) : unit(inv);
  v(1) = unit(static_cast<double>(state.last_lost) / dem_bound);
  v(2) = unit(static_cast<double>(state.last_demand) / dem_bound);
  v(3) = price(state.last_price);
  v(4) = price(state.competitor_price);
  v(5) = price(state.reference_price);
  Eigen::Index i = 6;
  for (int q : state.pipeline) v(i++) = unit(q / q_bound);
  v(i) = unit(static_cast<double>(state.period) / config.horizon);
  return v;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  CsvWriter csv(path, {"t", "price", "qty", "demand", "sales", "lost", "inventory", "reward"});
  for (std::size_t t = 0; t < trajectory.steps.size(); ++t) {
    const auto& s = trajectory.steps[t];
    csv.row(static_cast<long>(t + 1), s.action.price, s.action.quantity, s.outcome.demand, s.outcome.sales,
            s.outcome.lost, s.outcome.ending_inventory, s.outcome.reward);
  }
}

}  // namespace pricestock::market
