// SPDX-License-Identifier: Apache-2.0
#include "pricestock/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pricestock/error.hpp"

namespace pricestock::config {

using nlohmann::json;

namespace {

// ---- presets ---------------------------------------------------------------

market::ScenarioConfig small_market(int lead_time, market::ShortageMode mode, bool fixed) {
  market::ScenarioConfig s;
  s.mode = mode;
  s.fixed_cost = fixed;
  s.horizon = 20;
  s.discount = 1.0;
  s.prices = market::linspace(10.0, 30.0, 9);
  s.quantities = market::int_range(0, 12);
  demand::LogisticDemandParams d;
  d.eta = 40.0;
  d.delta = 0.5;
  d.beta << 3.0, -1.0, 0.05, 0.0, -0.12, -0.05;
  s.demand = d;
  s.competitor = {demand::CompetitorKind::UndercutCycle, 1.0, 10.0, 30.0};
  s.reference_smoothing = 0.5;
  s.costs.holding = 1.0;
  s.costs.shortage = 3.0;
  s.costs.ordering = 8.0;
  s.costs.fixed = 20.0;
  s.costs.lead_time = lead_time;
  s.initial_inventory = 5;
  return s;
}

// Linearized single-period market with frozen competitor and reference prices.
market::ScenarioConfig linearized_market(int horizon, std::vector<double> prices, std::vector<int> quantities) {
  const auto problem = analytic::SinglePeriodProblem::appendix_c();
  market::ScenarioConfig s;
  s.mode = market::ShortageMode::LostSales;
  s.horizon = horizon;
  s.prices = std::move(prices);
  s.quantities = std::move(quantities);
  s.demand = problem.demand;
  s.competitor = {demand::CompetitorKind::Fixed, 1.0, problem.price_domain.lo, problem.price_domain.hi};
  s.reference_smoothing = 0.0;
  s.costs = problem.costs;
  s.costs.lead_time = 0;
  s.initial_inventory = problem.initial_stock;
  return s;
}

ExperimentConfig base(std::string name) {
  ExperimentConfig c;
  c.preset = std::move(name);
  c.single_period = analytic::SinglePeriodProblem::appendix_c();
  c.single_period_prices = market::linspace(0.0, 80.0, 81);
  c.seeds = {0};
  c.fsda.hidden1 = 32;
  c.fsda.hidden2 = 32;
  // Tuned on the small market. Both actors move every round; the learning
  // rate decays to zero over the episode budget.
  c.fsda.episodes = 5000;
  c.fsda.episodes_per_update = 16;
  c.fsda.epochs = 10;
  c.fsda.entropy = 0.001;
  c.fsda.lr_fast = 3e-3;
  c.fsda.lr_slow = 3e-3;
  c.fsda.lr_critic = 3e-3;
  c.fsda.anneal_lr = true;
  c.fsda.greedy_eval = false;
  c.fsda.k.kind = fsda::KSchedule::Kind::Constant;
  c.fsda.k.constant = 1;
  c.search.budget = 400;
  c.search.episodes = 50;
  c.benchmark_scenarios = {"scenario-a", "scenario-b", "scenario-c", "scenario-d"};
  c.policies = {"random", "bslp", "ssp", "myopic", "fsda"};
  return c;
}

// ---- enum names ------------------------------------------------------------

template <class E>
struct Names;

template <>
struct Names<market::ShortageMode> {
  static constexpr std::pair<market::ShortageMode, const char*> table[] = {
      {market::ShortageMode::LostSales, "lost-sales"}, {market::ShortageMode::Backlog, "backlog"}};
};
template <>
struct Names<demand::CompetitorKind> {
  static constexpr std::pair<demand::CompetitorKind, const char*> table[] = {
      {demand::CompetitorKind::UndercutCycle, "undercut-cycle"},
      {demand::CompetitorKind::UniformRandom, "uniform-random"},
      {demand::CompetitorKind::Fixed, "fixed"}};
};
template <>
struct Names<sa::FastVariable> {
  static constexpr std::pair<sa::FastVariable, const char*> table[] = {{sa::FastVariable::Price, "price"},
                                                                       {sa::FastVariable::Stock, "stock"}};
};
template <>
struct Names<fsda::SlowAgent> {
  static constexpr std::pair<fsda::SlowAgent, const char*> table[] = {
      {fsda::SlowAgent::Pricing, "pricing"}, {fsda::SlowAgent::Replenishment, "replenishment"}};
};
template <>
struct Names<fsda::CriticTarget> {
  static constexpr std::pair<fsda::CriticTarget, const char*> table[] = {{fsda::CriticTarget::Gae, "gae"},
                                                                         {fsda::CriticTarget::Reward, "reward"}};
};
template <>
struct Names<fsda::KSchedule::Kind> {
  static constexpr std::pair<fsda::KSchedule::Kind, const char*> table[] = {
      {fsda::KSchedule::Kind::Constant, "constant"}, {fsda::KSchedule::Kind::HalfIteration, "half-iteration"}};
};

template <class E>
std::string name_of(E value) {
  for (const auto& [v, n] : Names<E>::table)
    if (v == value) return n;
  fail(ErrorKind::Config, "config: unnamed enum value");
}

template <class E>
E enum_from(const json& j, const char* key) {
  const auto text = j.at(key).get<std::string>();
  for (const auto& [v, n] : Names<E>::table)
    if (text == n) return v;
  fail(ErrorKind::Config, std::string("config: unknown value '") + text + "' for '" + key + "'");
}

// ---- to json ---------------------------------------------------------------

json to_json(const demand::DemandModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, demand::LogisticDemandParams>) {
          return {{"kind", "logistic"},
                  {"eta", m.eta},
                  {"delta", m.delta},
                  {"beta", std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size())}};
        } else if constexpr (std::is_same_v<T, demand::LinearizedDemandParams>) {
          return {{"kind", "linearized"}, {"eta", m.eta}, {"delta", m.delta}, {"a", m.a}, {"l", m.l}};
        } else {
          return {{"kind", "empirical"}, {"prices", m.prices}, {"rates", m.rates}};
        }
      },
      model);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const market::ScenarioConfig& s) {
  return {{"mode", name_of(s.mode)},
          {"fixed_cost", s.fixed_cost},
          {"horizon", s.horizon},
          {"discount", s.discount},
          {"prices", s.prices},
          {"quantities", s.quantities},
          {"demand", to_json(s.demand)},
          {"competitor",
           {{"kind", name_of(s.competitor.kind)},
            {"decrement", s.competitor.decrement},
            {"p_min", s.competitor.p_min},
            {"p_max", s.competitor.p_max}}},
          {"reference_smoothing", s.reference_smoothing},
          {"costs",
           {{"h", s.costs.holding},
            {"b", s.costs.shortage},
            {"c", s.costs.ordering},
            {"f", s.costs.fixed},
            {"z", s.costs.lead_time}}},
          {"initial_inventory", s.initial_inventory},
          {"initial_competitor_price", optional_number(s.initial_competitor_price)},
          {"initial_reference_price", optional_number(s.initial_reference_price)},
          {"inventory_bound", s.inventory_bound},
          {"demand_bound", s.demand_bound}};
}

json to_json(const analytic::SinglePeriodProblem& p) {
  return {{"h", p.costs.holding},
          {"b", p.costs.shortage},
          {"c", p.costs.ordering},
          {"x0", p.initial_stock},
          {"demand", to_json(demand::DemandModel{p.demand})},
          {"price_domain", {p.price_domain.lo, p.price_domain.hi}},
          {"stock_domain", {p.stock_domain.lo, p.stock_domain.hi}}};
}

json to_json(const sa::SAConfig& c) {
  return {{"fast_scale", c.schedule.fast_scale},
          {"fast_exponent", c.schedule.fast_exponent},
          {"slow_scale", c.schedule.slow_scale},
          {"slow_exponent", c.schedule.slow_exponent},
          {"offset", c.schedule.offset},
          {"fast", name_of(c.fast)},
          {"initial_price", c.initial_price},
          {"initial_stock", c.initial_stock},
          {"iterations", c.iterations},
          {"samples_per_step", c.samples_per_step},
          {"record_every", c.record_every},
          {"tail_fraction", c.tail_fraction}};
}

json to_json(const fsda::FSDAConfig& c) {
  return {{"episodes", c.episodes},
          {"episodes_per_update", c.episodes_per_update},
          {"epochs", c.epochs},
          {"clip", c.clip},
          {"entropy", c.entropy},
          {"gae_lambda", c.gae_lambda},
          {"discount", optional_number(c.discount)},
          {"lr_fast", c.lr_fast},
          {"lr_slow", c.lr_slow},
          {"lr_critic", c.lr_critic},
          {"slow_lr_divide_by_k", c.slow_lr_divide_by_k},
          {"anneal_lr", c.anneal_lr},
          {"max_grad_norm", c.max_grad_norm},
          {"k", {{"kind", name_of(c.k.kind)}, {"constant", c.k.constant}, {"cap", c.k.cap}}},
          {"slow", name_of(c.slow)},
          {"critic_target", name_of(c.critic_target)},
          {"normalize_advantages", c.normalize_advantages},
          {"scale_rewards", c.scale_rewards},
          {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},
          {"eval_every", c.eval_every},
          {"eval_episodes", c.eval_episodes},
          {"greedy_eval", c.greedy_eval}};
}

json to_json(const baselines::SearchConfig& c) {
  json grids = nullptr;
  if (c.grids) {
    grids = {{"stocks", c.grids->stocks},
             {"prices", c.grids->prices},
             {"slopes", c.grids->slopes},
             {"weights", c.grids->weights}};
  }
  return {{"budget", c.budget}, {"episodes", c.episodes}, {"fit_samples", c.fit_samples}, {"grids", grids}};
}

json to_json(const ExperimentConfig& c) {
  return {{"preset", c.preset},
          {"scenario", to_json(c.scenario)},
          {"single_period", to_json(c.single_period)},
          {"single_period_prices", c.single_period_prices},
          {"sa", to_json(c.sa)},
          {"fsda", to_json(c.fsda)},
          {"search", to_json(c.search)},
          {"dp", {{"tail_tolerance", c.dp.tail_tolerance}, {"budget", c.dp.budget}, {"demand_cap", c.dp.demand_cap}}},
          {"policies", c.policies},
          {"seeds", c.seeds},
          {"eval_episodes", c.eval_episodes},
          {"output", c.output},
          {"benchmark_scenarios", c.benchmark_scenarios}};
}

// ---- from json -------------------------------------------------------------

template <class T>
T get(const json& j, const char* key) {
  return j.at(key).get<T>();
}

std::optional<double> get_optional(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

// Arrays, or {"lo", "hi", "count"} shorthand for an evenly spaced grid.
std::vector<double> get_grid(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_object()) {
    return market::linspace(get<double>(v, "lo"), get<double>(v, "hi"), get<std::size_t>(v, "count"));
  }
  return v.get<std::vector<double>>();
}

demand::DemandModel demand_from(const json& j) {
  const auto kind = get<std::string>(j, "kind");
  if (kind == "logistic") {
    demand::LogisticDemandParams m;
    m.eta = get<double>(j, "eta");
    m.delta = get<double>(j, "delta");
    const auto beta = get<std::vector<double>>(j, "beta");
    require(beta.size() == 6, ErrorKind::Config, "config: logistic beta needs six coefficients");
    for (int i = 0; i < 6; ++i) m.beta[i] = beta[static_cast<std::size_t>(i)];
    return m;
  }
  if (kind == "linearized") {
    demand::LinearizedDemandParams m;
    m.eta = get<double>(j, "eta");
    m.delta = get<double>(j, "delta");
    m.a = get<double>(j, "a");
    m.l = get<double>(j, "l");
    return m;
  }
  if (kind == "empirical") {
    return demand::EmpiricalDemandTable{get<std::vector<double>>(j, "prices"), get<std::vector<double>>(j, "rates")};
  }
  fail(ErrorKind::Config, "config: unknown demand kind '" + kind + "'");
}

market::ScenarioConfig scenario_from(const json& j) {
  market::ScenarioConfig s;
  s.mode = enum_from<market::ShortageMode>(j, "mode");
  s.fixed_cost = get<bool>(j, "fixed_cost");
  s.horizon = get<int>(j, "horizon");
  s.discount = get<double>(j, "discount");
  s.prices = get_grid(j, "prices");
  s.quantities = get<std::vector<int>>(j, "quantities");
  s.demand = demand_from(j.at("demand"));
  const auto& comp = j.at("competitor");
  s.competitor = {enum_from<demand::CompetitorKind>(comp, "kind"), get<double>(comp, "decrement"),
                  get<double>(comp, "p_min"), get<double>(comp, "p_max")};
  s.reference_smoothing = get<double>(j, "reference_smoothing");
  const auto& k = j.at("costs");
  s.costs = {get<double>(k, "h"), get<double>(k, "b"), get<double>(k, "c"), get<double>(k, "f"), get<int>(k, "z")};
  s.initial_inventory = get<int>(j, "initial_inventory");
  s.initial_competitor_price = get_optional(j, "initial_competitor_price");
  s.initial_reference_price = get_optional(j, "initial_reference_price");
  s.inventory_bound = get<int>(j, "inventory_bound");
  s.demand_bound = get<int>(j, "demand_bound");
  return s;
}

analytic::SinglePeriodProblem single_period_from(const json& j) {
  analytic::SinglePeriodProblem p;
  p.costs.holding = get<double>(j, "h");
  p.costs.shortage = get<double>(j, "b");
  p.costs.ordering = get<double>(j, "c");
  p.initial_stock = get<int>(j, "x0");
  const auto model = demand_from(j.at("demand"));
  const auto* lin = std::get_if<demand::LinearizedDemandParams>(&model);
  require(lin != nullptr, ErrorKind::Config, "config: single_period demand must be linearized");
  p.demand = *lin;
  const auto pd = get<std::vector<double>>(j, "price_domain");
  const auto sd = get<std::vector<double>>(j, "stock_domain");
  require(pd.size() == 2 && sd.size() == 2, ErrorKind::Config, "config: domains are [lo, hi] pairs");
  p.price_domain = {pd[0], pd[1]};
  p.stock_domain = {sd[0], sd[1]};
  return p;
}

sa::SAConfig sa_from(const json& j) {
  sa::SAConfig c;
  c.schedule.fast_scale = get<double>(j, "fast_scale");
  c.schedule.fast_exponent = get<double>(j, "fast_exponent");
  c.schedule.slow_scale = get<double>(j, "slow_scale");
  c.schedule.slow_exponent = get<double>(j, "slow_exponent");
  c.schedule.offset = get<double>(j, "offset");
  c.fast = enum_from<sa::FastVariable>(j, "fast");
  c.initial_price = get<double>(j, "initial_price");
  c.initial_stock = get<double>(j, "initial_stock");
  c.iterations = get<long>(j, "iterations");
  c.samples_per_step = get<int>(j, "samples_per_step");
  c.record_every = get<int>(j, "record_every");
  c.tail_fraction = get<double>(j, "tail_fraction");
  return c;
}

fsda::FSDAConfig fsda_from(const json& j) {
  fsda::FSDAConfig c;
  c.episodes = get<long>(j, "episodes");
  c.episodes_per_update = get<int>(j, "episodes_per_update");
  c.epochs = get<int>(j, "epochs");
  c.clip = get<double>(j, "clip");
  c.entropy = get<double>(j, "entropy");
  c.gae_lambda = get<double>(j, "gae_lambda");
  c.discount = get_optional(j, "discount");
  c.lr_fast = get<double>(j, "lr_fast");
  c.lr_slow = get<double>(j, "lr_slow");
  c.lr_critic = get<double>(j, "lr_critic");
  c.slow_lr_divide_by_k = get<bool>(j, "slow_lr_divide_by_k");
  c.anneal_lr = get<bool>(j, "anneal_lr");
  c.max_grad_norm = get<double>(j, "max_grad_norm");
  const auto& k = j.at("k");
  c.k.kind = enum_from<fsda::KSchedule::Kind>(k, "kind");
  c.k.constant = get<int>(k, "constant");
  c.k.cap = get<int>(k, "cap");
  c.slow = enum_from<fsda::SlowAgent>(j, "slow");
  c.critic_target = enum_from<fsda::CriticTarget>(j, "critic_target");
  c.normalize_advantages = get<bool>(j, "normalize_advantages");
  c.scale_rewards = get<bool>(j, "scale_rewards");
  c.hidden1 = get<int>(j, "hidden1");
  c.hidden2 = get<int>(j, "hidden2");
  c.eval_every = get<int>(j, "eval_every");
  c.eval_episodes = get<int>(j, "eval_episodes");
  c.greedy_eval = get<bool>(j, "greedy_eval");
  return c;
}

baselines::SearchConfig search_from(const json& j) {
  baselines::SearchConfig c;
  c.budget = get<int>(j, "budget");
  c.episodes = get<int>(j, "episodes");
  c.fit_samples = get<int>(j, "fit_samples");
  const auto& g = j.at("grids");
  if (!g.is_null()) {
    c.grids = baselines::SearchGrids{get<std::vector<int>>(g, "stocks"), get_grid(g, "prices"),
                                     get<std::vector<double>>(g, "slopes"), get<std::vector<double>>(g, "weights")};
  }
  return c;
}

ExperimentConfig experiment_from(const json& j) {
  ExperimentConfig c;
  c.preset = get<std::string>(j, "preset");
  c.scenario = scenario_from(j.at("scenario"));
  c.single_period = single_period_from(j.at("single_period"));
  c.single_period_prices = get_grid(j, "single_period_prices");
  c.sa = sa_from(j.at("sa"));
  c.fsda = fsda_from(j.at("fsda"));
  c.search = search_from(j.at("search"));
  const auto& dp = j.at("dp");
  c.dp = {get<double>(dp, "tail_tolerance"), get<double>(dp, "budget"), get<int>(dp, "demand_cap")};
  c.policies = get<std::vector<std::string>>(j, "policies");
  c.seeds = get<std::vector<std::uint64_t>>(j, "seeds");
  c.eval_episodes = get<int>(j, "eval_episodes");
  c.output = get<std::string>(j, "output");
  c.benchmark_scenarios = get<std::vector<std::string>>(j, "benchmark_scenarios");
  return c;
}

// Overlays `patch` onto `target`. Objects merge key by key and reject keys the
// target lacks; a null target slot or a new demand "kind" replaces the value.
void overlay(json& target, const json& patch, const std::string& path) {
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    require(target.contains(key), ErrorKind::Config, "config: unknown key '" + where + "'");
    json& slot = target[key];
    const bool kind_change = key == "demand" && value.is_object() && slot.is_object() && value.contains("kind") &&
                             slot.contains("kind") && value["kind"] != slot["kind"];
    if (value.is_object() && slot.is_object() && !kind_change && !value.contains("lo")) {
      overlay(slot, value, where);
    } else {
      slot = value;
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  single_period.validate();
  require(!single_period_prices.empty(), ErrorKind::Config, "config: single_period_prices is empty");
  fsda.validate();
  search.validate();
  require(!seeds.empty(), ErrorKind::Config, "config: seed list must not be empty");
  require(eval_episodes >= 1, ErrorKind::Config, "config: eval_episodes must be >= 1");
  require(sa.iterations >= 0 && sa.samples_per_step >= 1 && sa.record_every >= 1, ErrorKind::Config,
          "config: SA iterations, samples and record cadence out of range");
  require(sa.tail_fraction > 0.0 && sa.tail_fraction <= 1.0, ErrorKind::Config,
          "config: SA tail_fraction must lie in (0, 1]");
  require(dp.tail_tolerance > 0.0 && dp.budget > 0.0 && dp.demand_cap >= 0, ErrorKind::Config,
          "config: DP settings out of range");
  for (const auto& p : policies) {
    require(p == "zero" || p == "random" || p == "bslp" || p == "ssp" || p == "myopic" || p == "fsda",
            ErrorKind::Config, "config: unknown policy '" + p + "'");
  }
  const auto names = preset_names();
  for (const auto& s : benchmark_scenarios) {
    require(std::find(names.begin(), names.end(), s) != names.end(), ErrorKind::Config,
            "config: unknown benchmark scenario '" + s + "'");
  }
}

std::vector<std::string> preset_names() {
  return {"appendix-c", "scenario-a", "scenario-b", "scenario-c", "scenario-d", "small", "tiny-dp"};
}

ExperimentConfig preset(std::string_view name) {
  using market::ShortageMode;
  ExperimentConfig c = base(std::string(name));
  if (name == "small") {
    c.scenario = small_market(1, ShortageMode::LostSales, false);
  } else if (name == "scenario-a") {
    c.scenario = small_market(3, ShortageMode::Backlog, false);
  } else if (name == "scenario-b") {
    c.scenario = small_market(3, ShortageMode::LostSales, false);
  } else if (name == "scenario-c") {
    c.scenario = small_market(3, ShortageMode::Backlog, true);
  } else if (name == "scenario-d") {
    c.scenario = small_market(3, ShortageMode::LostSales, true);
  } else if (name == "appendix-c") {
    c.scenario = linearized_market(1, market::linspace(0.0, 80.0, 81), market::int_range(0, 20));
    c.seeds.clear();
    for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(s);
    c.sa.record_every = 100;
    c.policies = {"zero", "random"};
  } else if (name == "tiny-dp") {
    c.scenario = linearized_market(2, {40.0, 55.0, 70.0}, {0, 1, 2});
    c.dp.demand_cap = 7;
    c.policies = {"zero", "random"};
  } else {
    fail(ErrorKind::Config, "config: unknown preset '" + std::string(name) + "'");
  }
  return c;
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig parse_config(std::string_view text) {
  json patch;
  try {
    patch = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  require(patch.is_object(), ErrorKind::Config, "config: top level must be an object");
  try {
    const std::string name = patch.contains("preset") ? patch["preset"].get<std::string>() : "small";
    json merged = to_json(preset(name));
    overlay(merged, patch, "");
    ExperimentConfig c = experiment_from(merged);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace pricestock::config
