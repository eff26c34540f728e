// SPDX-License-Identifier: Apache-2.0
#include "pricestock/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"

namespace pricestock::baselines {

double BSLPParams::price(double position) const {
  if (position <= base_stock) return list_price;
  return list_price - markdown * (position - base_stock);
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::BSLP: return "bslp";
    case PolicyKind::SSP: return "ssp";
    case PolicyKind::Myopic: return "myopic";
  }
  return "?";
}

PolicyKind parse_policy_kind(std::string_view name) {
  if (name == "bslp") return PolicyKind::BSLP;
  if (name == "ssp" || name == "sSp" || name == "(s,S,p)") return PolicyKind::SSP;
  if (name == "myopic") return PolicyKind::Myopic;
  fail(ErrorKind::Config, "unknown baseline policy '" + std::string(name) + "' (expected bslp, ssp or myopic)");
}

double snap_price(const market::ScenarioConfig& config, double price) {
  const auto& g = config.prices;
  const double p = std::clamp(price, g.front(), g.back());
  auto it = std::lower_bound(g.begin(), g.end(), p);
  if (it == g.begin()) return *it;
  if (it == g.end()) return g.back();
  const double hi = *it, lo = *(it - 1);
  return (p - lo) <= (hi - p) ? lo : hi;
}

int snap_quantity(const market::ScenarioConfig& config, double quantity) {
  const auto& g = config.quantities;
  const double q = std::clamp(quantity, static_cast<double>(g.front()), static_cast<double>(g.back()));
  auto it = std::lower_bound(g.begin(), g.end(), q, [](int a, double b) { return a < b; });
  if (it == g.begin()) return *it;
  if (it == g.end()) return g.back();
  const int hi = *it, lo = *(it - 1);
  return (q - lo) <= (hi - q) ? lo : hi;
}

long inventory_position(const market::MarketState& state) {
  return state.inventory + std::accumulate(state.pipeline.begin(), state.pipeline.end(), 0L);
}

market::Action act_bslp(const BSLPParams& params, const market::MarketState& state,
                        const market::ScenarioConfig& config) {
  const long x = inventory_position(state);
  if (x < params.base_stock)
    return {snap_price(config, params.list_price), snap_quantity(config, static_cast<double>(params.base_stock - x))};
  return {snap_price(config, params.price(static_cast<double>(x))), snap_quantity(config, 0.0)};
}

market::Action act_ssp(const SSPParams& params, const market::MarketState& state,
                       const market::ScenarioConfig& config) {
  const long x = state.inventory;
  const double q = x < params.s ? static_cast<double>(params.S - x) : 0.0;
  return {snap_price(config, params.intercept + params.slope * static_cast<double>(x)), snap_quantity(config, q)};
}

market::Action act_myopic(const MyopicParams& params, const market::MarketState& state,
                          const market::ScenarioConfig& config) {
  const double pipeline = std::accumulate(state.pipeline.begin(), state.pipeline.end(), 0.0);
  const double position = static_cast<double>(state.inventory) + params.weight * pipeline;
  const double q = std::max(0.0, params.base_stock - position);
  return {snap_price(config, params.intercept + params.slope * position), snap_quantity(config, q)};
}

market::Policy make_policy(const BaselineParams& params, const market::ScenarioConfig& config) {
  return std::visit(
      [&config](const auto& p) -> market::Policy {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, BSLPParams>)
          return [p, &config](const market::MarketState& s) { return act_bslp(p, s, config); };
        else if constexpr (std::is_same_v<T, SSPParams>)
          return [p, &config](const market::MarketState& s) { return act_ssp(p, s, config); };
        else
          return [p, &config](const market::MarketState& s) { return act_myopic(p, s, config); };
      },
      params);
}

market::Policy random_policy(const market::ScenarioConfig& config, Rng& rng) {
  return [&config, &rng](const market::MarketState&) {
    const auto pi = uniform_index(rng, config.prices.size());
    const auto qi = uniform_index(rng, config.quantities.size());
    return market::Action{config.prices[pi], config.quantities[qi]};
  };
}

std::vector<double> evaluate_policy(const market::ScenarioConfig& config, const market::Policy& policy,
                                    int episodes, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    Rng rng = make_stream(seed, "eval", static_cast<std::uint64_t>(i));
    out.push_back(market::run_episode(config, policy, rng).total_reward);
  }
  return out;
}

std::vector<double> evaluate_random(const market::ScenarioConfig& config, int episodes, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    Rng env = make_stream(seed, "eval", static_cast<std::uint64_t>(i));
    Rng act = make_stream(seed, "eval/random-actions", static_cast<std::uint64_t>(i));
    out.push_back(market::run_episode(config, random_policy(config, act), env).total_reward);
  }
  return out;
}

SearchGrids default_grids(const market::ScenarioConfig& config) {
  SearchGrids g;
  const int top = (config.costs.lead_time + 1) * config.max_quantity();
  const int step = std::max(1, (top + 19) / 20);
  for (int v = 0; v <= top; v += step) g.stocks.push_back(v);
  if (g.stocks.back() != top) g.stocks.push_back(top);
  g.prices = config.prices;
  const double unit = config.prices.size() > 1
                          ? (config.max_price() - config.min_price()) / static_cast<double>(config.prices.size() - 1)
                          : 1.0;
  for (double m : {0.0, 0.25, 0.5, 1.0, 2.0}) g.slopes.push_back(m * unit);
  g.weights = {0.0, 0.5, 1.0};
  return g;
}

void SearchConfig::validate() const {
  require(budget >= 1, ErrorKind::Config, "search: budget must be >= 1");
  require(episodes >= 1, ErrorKind::Config, "search: episodes must be >= 1");
  require(fit_samples >= 3, ErrorKind::Config, "search: need at least 3 fit samples");
}

std::vector<demand::PriceDemand> simulate_price_demand(const market::ScenarioConfig& config, int samples,
                                                       std::uint64_t seed) {
  std::vector<demand::PriceDemand> out;
  out.reserve(static_cast<std::size_t>(samples));
  for (std::uint64_t i = 0; static_cast<int>(out.size()) < samples; ++i) {
    Rng env = make_stream(seed, "baseline/fit-env", i);
    Rng act = make_stream(seed, "baseline/fit-actions", i);
    const auto traj = market::run_episode(config, random_policy(config, act), env);
    for (const auto& s : traj.steps) {
      if (static_cast<int>(out.size()) == samples) break;
      out.push_back({s.action.price, static_cast<double>(s.outcome.demand)});
    }
  }
  return out;
}

namespace {

std::vector<BaselineParams> enumerate(PolicyKind kind, const SearchGrids& g) {
  std::vector<BaselineParams> out;
  switch (kind) {
    case PolicyKind::BSLP:
      for (int y : g.stocks)
        for (double p : g.prices)
          for (double m : g.slopes) out.emplace_back(BSLPParams{y, p, m});
      break;
    case PolicyKind::SSP:
      for (int s : g.stocks)
        for (int S : g.stocks) {
          if (S <= s) continue;
          for (double p : g.prices)
            for (double m : g.slopes) out.emplace_back(SSPParams{s, S, p, -m});
        }
      break;
    case PolicyKind::Myopic:
      for (int y : g.stocks)
        for (double w : g.weights)
          for (double p : g.prices)
            for (double m : g.slopes) out.emplace_back(MyopicParams{y, w, p, -m});
      break;
  }
  return out;
}

// Steady-state one-period profit under the fitted mean demand: sell and
// replace min(mu, cover) units, pay holding on the excess cover and shortage
// on the unmet mean.
double proxy_score(const BaselineParams& params, const market::ScenarioConfig& config, const demand::FitResult& fit) {
  const double lead = config.costs.lead_time + 1.0;
  double price = 0.0, stock = 0.0;
  if (const auto* b = std::get_if<BSLPParams>(&params)) {
    price = b->list_price;
    stock = b->base_stock;
  } else if (const auto* s = std::get_if<SSPParams>(&params)) {
    stock = 0.5 * (s->s + s->S);
    price = s->intercept + s->slope * stock;
  } else {
    const auto& m = std::get<MyopicParams>(params);
    stock = m.base_stock;
    price = m.intercept + m.slope * stock;
  }
  price = snap_price(config, price);
  const double mu = std::max(0.0, demand::predict(fit, price));
  const double cover = stock / lead;
  const auto& k = config.costs;
  return (price - k.ordering) * std::min(mu, cover) - k.holding * std::max(cover - mu, 0.0) -
         k.shortage * std::max(mu - cover, 0.0);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(sq / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

SearchResult search_parameters(PolicyKind kind, const market::ScenarioConfig& config, const SearchConfig& search) {
  config.validate();
  search.validate();
  const SearchGrids grids = search.grids.value_or(default_grids(config));
  require(!grids.stocks.empty() && !grids.prices.empty() && !grids.slopes.empty() &&
              (kind != PolicyKind::Myopic || !grids.weights.empty()),
          ErrorKind::Config, "search: empty parameter grid");
  std::vector<BaselineParams> candidates = enumerate(kind, grids);
  require(!candidates.empty(), ErrorKind::Config, "search: parameter grid has no admissible candidate");

  SearchResult result;
  result.kind = kind;

  // Stage 1: stationary demand pattern.
  const auto pairs = simulate_price_demand(config, search.fit_samples, search.seed);
  bool have_fit = false;
  for (auto fk : {demand::FitKind::Linear, demand::FitKind::Exponential, demand::FitKind::IsoElasticity,
                  demand::FitKind::Logit}) {
    try {
      const auto fit = demand::fit_demand_model(fk, pairs);
      if (!have_fit || fit.r_squared > result.fit.r_squared) {
        result.fit = fit;
        have_fit = true;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Domain && e.kind() != ErrorKind::Singular) throw;
    }
  }
  require(have_fit, ErrorKind::Domain, "search: no demand model could be fitted to the simulated pairs");

  // Stage 2: rank by proxy, evaluate the top `budget` on common random numbers.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  if (static_cast<std::size_t>(search.budget) < candidates.size()) {
    std::vector<double> score(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) score[i] = proxy_score(candidates[i], config, result.fit);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    order.resize(static_cast<std::size_t>(search.budget));
    std::sort(order.begin(), order.end());
  }

  const std::uint64_t eval_seed = mix64(search.seed ^ hash_name("baseline/search"));
  for (std::size_t idx : order) {
    const auto returns = evaluate_policy(config, make_policy(candidates[idx], config), search.episodes, eval_seed);
    const auto [mean, sd] = mean_std(returns);
    result.evaluated.push_back({candidates[idx], idx, mean, sd});
    if (result.evaluated.size() == 1 || mean > result.best.mean) result.best = result.evaluated.back();
  }
  return result;
}

std::vector<std::string> param_header(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::BSLP: return {"base_stock", "list_price", "markdown"};
    case PolicyKind::SSP: return {"s", "S", "intercept", "slope"};
    case PolicyKind::Myopic: return {"base_stock", "weight", "intercept", "slope"};
  }
  return {};
}

std::vector<std::string> param_cells(const BaselineParams& params) {
  if (const auto* b = std::get_if<BSLPParams>(&params))
    return {format_number(b->base_stock), format_number(b->list_price), format_number(b->markdown)};
  if (const auto* s = std::get_if<SSPParams>(&params))
    return {format_number(s->s), format_number(s->S), format_number(s->intercept), format_number(s->slope)};
  const auto& m = std::get<MyopicParams>(params);
  return {format_number(m.base_stock), format_number(m.weight), format_number(m.intercept), format_number(m.slope)};
}

void write_search_csv(const std::string& path, const SearchResult& result) {
  auto header = param_header(result.kind);
  header.push_back("mean_return");
  header.push_back("std_return");
  CsvWriter csv(path, header);
  for (const auto& c : result.evaluated) {
    auto cells = param_cells(c.params);
    cells.push_back(format_number(c.mean));
    cells.push_back(format_number(c.std));
    csv.write_cells(cells);
  }
}

}  // namespace pricestock::baselines
