// SPDX-License-Identifier: Apache-2.0
#include "pricestock/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"

namespace pricestock::dp {

void DPInstance::validate() const {
  costs.validate();
  require(horizon >= 1, ErrorKind::Config, "dp: horizon must be >= 1");
  require(discount >= 0.0 && discount <= 1.0, ErrorKind::Config, "dp: discount must lie in [0, 1]");
  require(!prices.empty() && !quantities.empty(), ErrorKind::Config, "dp: empty action grid");
  require(rates.size() == prices.size(), ErrorKind::Shape, "dp: one rate per price required");
  for (double r : rates) require(std::isfinite(r) && r >= 0.0, ErrorKind::Domain, "dp: rates must be finite and >= 0");
  for (std::size_t i = 1; i < quantities.size(); ++i)
    require(quantities[i] > quantities[i - 1], ErrorKind::Config, "dp: quantity grid must be strictly increasing");
  require(quantities.front() >= 0, ErrorKind::Config, "dp: quantities must be non-negative");
  require(initial_inventory >= 0, ErrorKind::Config, "dp: initial inventory must be >= 0");
  require(costs.lead_time <= 2 && (costs.lead_time == 0 || quantities.size() <= 5), ErrorKind::Size,
          "dp: pipeline states are enumerated only for lead time <= 2 and at most 5 quantities");
  require(costs.lead_time == 0 || quantities.front() == 0, ErrorKind::Config,
          "dp: with a lead time the quantity grid must contain 0 (empty initial pipeline)");
  require(tail_tolerance > 0.0 && tail_tolerance < 1.0, ErrorKind::Config, "dp: tail tolerance must lie in (0, 1)");
  require(demand_cap >= 0, ErrorKind::Config, "dp: demand cap must be >= 0");
}

DPInstance DPInstance::from_scenario(const market::ScenarioConfig& config) {
  config.validate();
  require(config.mode == market::ShortageMode::LostSales, ErrorKind::Config, "dp: only lost-sales scenarios");
  const bool price_only = !std::holds_alternative<demand::LogisticDemandParams>(config.demand);
  require(price_only || (config.competitor.kind == demand::CompetitorKind::Fixed && config.reference_smoothing == 0.0),
          ErrorKind::Config, "dp: logistic demand needs a fixed competitor and zero reference smoothing");
  DPInstance inst;
  inst.horizon = config.horizon;
  inst.discount = config.discount;
  inst.prices = config.prices;
  inst.quantities = config.quantities;
  inst.costs = config.costs;
  inst.fixed_cost = config.fixed_cost;
  inst.initial_inventory = config.initial_inventory;
  const market::MarketState s0 = market::reset(config);
  for (double p : config.prices) inst.rates.push_back(market::period_rate(config, s0, {p, 0}));
  return inst;
}

DPInstance DPInstance::single_period(const analytic::SinglePeriodProblem& problem, const std::vector<double>& prices) {
  problem.validate();
  DPInstance inst;
  inst.horizon = 1;
  inst.prices = prices;
  inst.costs = problem.costs;
  inst.costs.lead_time = 0;
  inst.initial_inventory = problem.initial_stock;
  const int x_lo = std::max(problem.initial_stock, static_cast<int>(std::ceil(problem.stock_domain.lo)));
  const int x_hi = static_cast<int>(std::floor(problem.stock_domain.hi));
  require(x_lo <= x_hi, ErrorKind::Config, "dp: no feasible stock level");
  for (int x = x_lo; x <= x_hi; ++x) inst.quantities.push_back(x - problem.initial_stock);
  for (double p : prices) inst.rates.push_back(problem.rate(p));
  return inst;
}

DemandTable demand_table(const DPInstance& instance) {
  const double max_rate = *std::max_element(instance.rates.begin(), instance.rates.end());
  // Smallest n with P(d >= n) < tol at the largest rate; the Poisson tail is
  // increasing in the rate, so n covers every price.
  int n = 1;
  double cdf = analytic::poisson_pmf(max_rate, 0);
  while (1.0 - cdf >= instance.tail_tolerance && n < 100000) {
    cdf += analytic::poisson_pmf(max_rate, n);
    ++n;
  }
  if (instance.demand_cap > 0) n = std::min(n, instance.demand_cap + 1);

  DemandTable table;
  table.support = n;
  table.pmf.assign(instance.rates.size(), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (std::size_t i = 0; i < instance.rates.size(); ++i) {
    double mass = 0.0;
    for (int d = 0; d + 1 < n; ++d) {
      table.pmf[i][static_cast<std::size_t>(d)] = analytic::poisson_pmf(instance.rates[i], d);
      mass += table.pmf[i][static_cast<std::size_t>(d)];
    }
    table.pmf[i].back() = std::max(0.0, 1.0 - mass);
  }
  return table;
}

StateIndexer::StateIndexer(int max_inventory, int lead_time, int quantity_count)
    : max_inventory_(max_inventory), lead_time_(lead_time), quantity_count_(quantity_count) {
  size_ = max_inventory + 1;
  for (int i = 0; i < lead_time; ++i) size_ *= quantity_count;
}

int StateIndexer::encode(int inventory, const std::vector<int>& pipeline_indices) const {
  int code = 0;
  for (int i = lead_time_ - 1; i >= 0; --i) code = code * quantity_count_ + pipeline_indices[static_cast<std::size_t>(i)];
  return inventory + (max_inventory_ + 1) * code;
}

std::vector<int> StateIndexer::pipeline(int index) const {
  std::vector<int> out(static_cast<std::size_t>(lead_time_));
  int code = index / (max_inventory_ + 1);
  for (int i = 0; i < lead_time_; ++i) {
    out[static_cast<std::size_t>(i)] = code % quantity_count_;
    code /= quantity_count_;
  }
  return out;
}

namespace {

struct Model {
  const DPInstance& inst;
  DemandTable table;
  StateIndexer states;
  int q_max = 0;

  explicit Model(const DPInstance& instance) : inst(instance), table(demand_table(instance)) {
    q_max = instance.quantities.back();
    states = StateIndexer(instance.initial_inventory + instance.horizon * q_max, instance.costs.lead_time,
                          static_cast<int>(instance.quantities.size()));
  }

  // Largest inventory reachable at the start of period t (0-based).
  int inventory_cap(int t) const { return inst.initial_inventory + t * q_max; }

  int states_at(int t) const {
    int n = inventory_cap(t) + 1;
    for (int i = 0; i < inst.costs.lead_time; ++i) n *= static_cast<int>(inst.quantities.size());
    return n;
  }

  double reward(double price, long on_hand, long d, int quantity) const {
    const long sales = std::min(d, on_hand);
    const long lost = std::max(d - on_hand, 0L);
    const long ending = std::max(on_hand - d, 0L);
    double r = price * static_cast<double>(sales) - inst.costs.holding * static_cast<double>(ending) -
               inst.costs.shortage * static_cast<double>(lost) - inst.costs.ordering * quantity;
    if (inst.fixed_cost && quantity > 0) r -= inst.costs.fixed;
    return r;
  }

  // Arriving units and the successor pipeline for action qi.
  std::pair<int, std::vector<int>> advance_pipeline(const std::vector<int>& pipe, int qi) const {
    if (pipe.empty()) return {inst.quantities[static_cast<std::size_t>(qi)], {}};
    std::vector<int> next(pipe.begin() + 1, pipe.end());
    next.push_back(qi);
    return {inst.quantities[static_cast<std::size_t>(pipe.front())], next};
  }

  int initial_state() const {
    return states.encode(inst.initial_inventory, std::vector<int>(static_cast<std::size_t>(inst.costs.lead_time), 0));
  }
};

std::string size_message(const DPInstance& inst, double planned, int support) {
  std::ostringstream os;
  os << "dp: instance needs " << planned << " value updates, over the budget of " << inst.budget
     << "; history-tree cost sum_t (PQD)^t = "
     << tree_cost(static_cast<int>(inst.prices.size()), static_cast<int>(inst.quantities.size()), support,
                  inst.horizon);
  return os.str();
}

}  // namespace

double tree_cost(int prices, int quantities, int demand_support, int horizon) {
  const double base = static_cast<double>(prices) * quantities * demand_support;
  double total = 0.0, term = 1.0;
  for (int t = 1; t <= horizon; ++t) {
    term *= base;
    total += term;
  }
  return total;
}

double planned_updates(const DPInstance& instance) {
  instance.validate();
  const Model m(instance);
  double total = 0.0;
  const double per_state = static_cast<double>(instance.prices.size()) * static_cast<double>(instance.quantities.size()) *
                           m.table.support;
  for (int t = 0; t < instance.horizon; ++t) total += m.states_at(t) * per_state;
  return total;
}

DPSolution backward_induction(const DPInstance& instance) {
  const double planned = planned_updates(instance);
  const Model m(instance);
  if (planned > instance.budget) fail(ErrorKind::Size, size_message(instance, planned, m.table.support));

  const int T = instance.horizon;
  const std::size_t n_states = static_cast<std::size_t>(m.states.size());
  DPSolution sol;
  sol.states = m.states;
  sol.demand_support = m.table.support;
  sol.value.assign(static_cast<std::size_t>(T), std::vector<double>(n_states, 0.0));
  sol.policy.price_index.assign(static_cast<std::size_t>(T), std::vector<int>(n_states, -1));
  sol.policy.quantity_index.assign(static_cast<std::size_t>(T), std::vector<int>(n_states, -1));

  const int P = static_cast<int>(instance.prices.size());
  const int Q = static_cast<int>(instance.quantities.size());
  const int D = m.table.support;
  const int inv_radix = m.states.max_inventory() + 1;
  std::vector<double> zero(n_states, 0.0);

  for (int t = T - 1; t >= 0; --t) {
    const auto& next_value = t + 1 < T ? sol.value[static_cast<std::size_t>(t + 1)] : zero;
    const int cap = m.inventory_cap(t);
    const int codes = m.states_at(t) / (cap + 1);
    for (int code = 0; code < codes; ++code) {
      const std::vector<int> pipe = m.states.pipeline(code * inv_radix);
      for (int inv = 0; inv <= cap; ++inv) {
        const int s = inv + code * inv_radix;
        double best = -std::numeric_limits<double>::infinity();
        int best_p = -1, best_q = -1;
        for (int pi = 0; pi < P; ++pi) {
          const double price = instance.prices[static_cast<std::size_t>(pi)];
          const auto& pmf = m.table.pmf[static_cast<std::size_t>(pi)];
          for (int qi = 0; qi < Q; ++qi) {
            const auto [arriving, next_pipe] = m.advance_pipeline(pipe, qi);
            const long on_hand = inv + arriving;
            const int quantity = instance.quantities[static_cast<std::size_t>(qi)];
            double q_value = 0.0;
            for (int d = 0; d < D; ++d) {
              const double w = pmf[static_cast<std::size_t>(d)];
              if (w == 0.0) continue;
              const int ending = static_cast<int>(std::max(on_hand - d, 0L));
              const double cont = t + 1 < T ? next_value[static_cast<std::size_t>(m.states.encode(ending, next_pipe))] : 0.0;
              q_value += w * (m.reward(price, on_hand, d, quantity) + instance.discount * cont);
            }
            sol.updates += D;
            if (q_value > best) {
              best = q_value;
              best_p = pi;
              best_q = qi;
            }
          }
        }
        sol.value[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = best;
        sol.policy.price_index[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = best_p;
        sol.policy.quantity_index[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)] = best_q;
      }
    }
  }
  sol.initial_state = m.initial_state();
  sol.initial_value = sol.value.front()[static_cast<std::size_t>(sol.initial_state)];
  return sol;
}

double evaluate_policy(const DPInstance& instance, const PolicyTable& policy) {
  instance.validate();
  const Model m(instance);
  const int T = instance.horizon;
  require(static_cast<int>(policy.price_index.size()) == T && static_cast<int>(policy.quantity_index.size()) == T,
          ErrorKind::Shape, "evaluate_policy: one table row per period required");
  const std::size_t n_states = static_cast<std::size_t>(m.states.size());
  std::vector<double> mass(n_states, 0.0), next_mass(n_states, 0.0);
  mass[static_cast<std::size_t>(m.initial_state())] = 1.0;
  double total = 0.0, weight = 1.0;
  const int D = m.table.support;

  for (int t = 0; t < T; ++t) {
    const auto& prow = policy.price_index[static_cast<std::size_t>(t)];
    const auto& qrow = policy.quantity_index[static_cast<std::size_t>(t)];
    require(prow.size() == n_states && qrow.size() == n_states, ErrorKind::Shape,
            "evaluate_policy: policy table has the wrong state count");
    std::fill(next_mass.begin(), next_mass.end(), 0.0);
    for (std::size_t s = 0; s < n_states; ++s) {
      if (mass[s] == 0.0) continue;
      const int pi = prow[s], qi = qrow[s];
      require(pi >= 0 && pi < static_cast<int>(instance.prices.size()) && qi >= 0 &&
                  qi < static_cast<int>(instance.quantities.size()),
              ErrorKind::Contract, "evaluate_policy: policy undefined on a reachable state");
      const int inv = m.states.inventory(static_cast<int>(s));
      const auto [arriving, next_pipe] = m.advance_pipeline(m.states.pipeline(static_cast<int>(s)), qi);
      const long on_hand = inv + arriving;
      const auto& pmf = m.table.pmf[static_cast<std::size_t>(pi)];
      const double price = instance.prices[static_cast<std::size_t>(pi)];
      const int quantity = instance.quantities[static_cast<std::size_t>(qi)];
      for (int d = 0; d < D; ++d) {
        const double w = mass[s] * pmf[static_cast<std::size_t>(d)];
        if (w == 0.0) continue;
        total += weight * w * m.reward(price, on_hand, d, quantity);
        const int ending = static_cast<int>(std::max(on_hand - d, 0L));
        if (t + 1 < T) next_mass[static_cast<std::size_t>(m.states.encode(ending, next_pipe))] += w;
      }
    }
    std::swap(mass, next_mass);
    weight *= instance.discount;
  }
  return total;
}

namespace {

double expectimax(const Model& m, int t, int inv, const std::vector<int>& pipe, double& updates) {
  const auto& inst = m.inst;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t pi = 0; pi < inst.prices.size(); ++pi) {
    for (std::size_t qi = 0; qi < inst.quantities.size(); ++qi) {
      const auto [arriving, next_pipe] = m.advance_pipeline(pipe, static_cast<int>(qi));
      const long on_hand = inv + arriving;
      double v = 0.0;
      for (int d = 0; d < m.table.support; ++d) {
        const double w = m.table.pmf[pi][static_cast<std::size_t>(d)];
        updates += 1.0;
        double term = m.reward(inst.prices[pi], on_hand, d, inst.quantities[qi]);
        if (t + 1 < inst.horizon)
          term += inst.discount * expectimax(m, t + 1, static_cast<int>(std::max(on_hand - d, 0L)), next_pipe, updates);
        v += w * term;
      }
      best = std::max(best, v);
    }
  }
  return best;
}

}  // namespace

TreeResult tree_expectimax(const DPInstance& instance) {
  instance.validate();
  const Model m(instance);
  const double cost = tree_cost(static_cast<int>(instance.prices.size()), static_cast<int>(instance.quantities.size()),
                                m.table.support, instance.horizon);
  if (cost > instance.budget) fail(ErrorKind::Size, size_message(instance, cost, m.table.support));
  TreeResult out;
  out.value = expectimax(m, 0, instance.initial_inventory,
                         std::vector<int>(static_cast<std::size_t>(instance.costs.lead_time), 0), out.updates);
  return out;
}

void write_solution_csv(const std::string& path, const DPInstance& instance, const DPSolution& solution) {
  CsvWriter csv(path, {"t", "inventory", "pipeline", "value", "price", "quantity"});
  const Model m(instance);
  const int inv_radix = solution.states.max_inventory() + 1;
  for (int t = 0; t < instance.horizon; ++t) {
    const int cap = m.inventory_cap(t);
    const int codes = m.states_at(t) / (cap + 1);
    for (int code = 0; code < codes; ++code) {
      for (int inv = 0; inv <= cap; ++inv) {
        const int s = inv + code * inv_radix;
        std::string pipe;
        for (int qi : solution.states.pipeline(s)) {
          if (!pipe.empty()) pipe += ' ';
          pipe += std::to_string(instance.quantities[static_cast<std::size_t>(qi)]);
        }
        const auto ts = static_cast<std::size_t>(t), ss = static_cast<std::size_t>(s);
        csv.row(t + 1, inv, pipe, solution.value[ts][ss],
                instance.prices[static_cast<std::size_t>(solution.policy.price_index[ts][ss])],
                instance.quantities[static_cast<std::size_t>(solution.policy.quantity_index[ts][ss])]);
      }
    }
  }
}

}  // namespace pricestock::dp
