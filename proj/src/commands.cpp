// SPDX-License-Identifier: Apache-2.0
#include "pricestock/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "pricestock/analytic.hpp"
#include "pricestock/baselines.hpp"
#include "pricestock/csv.hpp"
#include "pricestock/demand_fit.hpp"
#include "pricestock/dp.hpp"
#include "pricestock/error.hpp"
#include "pricestock/fsda.hpp"
#include "pricestock/sa.hpp"

namespace pricestock::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Stats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

double median(std::vector<double> v) {
  require(!v.empty(), ErrorKind::Contract, "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path prepare_output(const config::ExperimentConfig& config) {
  const fs::path dir(config.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::Io, "cannot create output directory '" + config.output + "'");
  std::ofstream cfg(dir / "config.json");
  require(static_cast<bool>(cfg), ErrorKind::Io, "cannot write '" + (dir / "config.json").string() + "'");
  cfg << config::dump_config(config);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << j.dump(2) << "\n";
  require(static_cast<bool>(f), ErrorKind::Io, "write failed for '" + path.string() + "'");
}

market::Policy zero_policy(const market::ScenarioConfig& scenario) {
  const market::Action a{scenario.mid_price(), scenario.quantities.front()};
  return [a](const market::MarketState&) { return a; };
}

bool is_baseline(const std::string& name) { return name == "bslp" || name == "ssp" || name == "myopic"; }

fsda::FSDAConfig seeded(fsda::FSDAConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

baselines::SearchConfig seeded(baselines::SearchConfig c, std::uint64_t seed) {
  c.seed = seed;
  return c;
}

json params_json(const baselines::BaselineParams& params, baselines::PolicyKind kind) {
  json j = json::object();
  const auto header = baselines::param_header(kind);
  const auto cells = baselines::param_cells(params);
  for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) j[header[i]] = cells[i];
  return j;
}

json report_json(const analytic::OptimalityReport& r) {
  return {{"g_value", r.g_value},
          {"slope_below", r.slope_below},
          {"slope_above", r.slope_above},
          {"satisfied", r.satisfied},
          {"boundary", r.boundary},
          {"boundary_optimal", r.boundary_optimal},
          {"newton_distance", r.newton_distance}};
}

// Held-out returns of one named policy on one scenario for one seed.
std::vector<double> policy_returns(const std::string& name, const market::ScenarioConfig& scenario,
                                   const config::ExperimentConfig& config, std::uint64_t seed) {
  const std::uint64_t held = heldout_seed(seed);
  const int n = config.eval_episodes;
  if (name == "zero") return baselines::evaluate_policy(scenario, zero_policy(scenario), n, held);
  if (name == "random") return baselines::evaluate_random(scenario, n, held);
  if (is_baseline(name)) {
    const auto kind = baselines::parse_policy_kind(name);
    const auto found = baselines::search_parameters(kind, scenario, seeded(config.search, seed));
    return baselines::evaluate_policy(scenario, baselines::make_policy(found.best.params, scenario), n, held);
  }
  if (name == "fsda") {
    const auto trained = fsda::train(scenario, seeded(config.fsda, seed));
    fsda::SingleProductGame game(scenario);
    return fsda::evaluate(game, trained.bundle, n, held, config.fsda.greedy_eval);
  }
  fail(ErrorKind::Config, "unknown policy '" + name + "'");
}

}  // namespace

std::uint64_t heldout_seed(std::uint64_t seed) { return mix64(seed ^ hash_name("heldout")); }

config::ExperimentConfig resolve_config(const Options& options) {
  json patch = json::object();
  if (!options.config_path.empty()) {
    std::ifstream in(options.config_path);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot open config '" + options.config_path + "'");
    try {
      patch = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Parse, std::string("config: ") + e.what());
    }
    require(patch.is_object(), ErrorKind::Config, "config: top level must be an object");
  }
  if (!options.preset.empty()) patch["preset"] = options.preset;
  config::ExperimentConfig c = config::parse_config(patch.dump());
  if (options.seed) c.seeds = {*options.seed};
  if (!options.out.empty()) c.output = options.out;
  c.validate();
  return c;
}

void cmd_simulate(const config::ExperimentConfig& config, std::ostream& out) {
  const fs::path dir = prepare_output(config);
  const auto& scenario = config.scenario;
  require(!config.policies.empty(), ErrorKind::Config, "simulate: no policies configured");
  CsvWriter summary((dir / "simulate_summary.csv").string(), {"policy", "mean_reward", "std_reward", "n_seeds"});
  json report = json::array();
  for (const auto& name : config.policies) {
    std::vector<double> totals;
    for (std::uint64_t seed : config.seeds) {
      Rng actions = make_stream(seed, "simulate/random-actions");
      market::Policy policy;
      fsda::TrainResult trained;
      if (name == "zero") {
        policy = zero_policy(scenario);
      } else if (name == "random") {
        policy = baselines::random_policy(scenario, actions);
      } else if (is_baseline(name)) {
        const auto found =
            baselines::search_parameters(baselines::parse_policy_kind(name), scenario, seeded(config.search, seed));
        policy = baselines::make_policy(found.best.params, scenario);
      } else if (name == "fsda") {
        trained = fsda::train(scenario, seeded(config.fsda, seed));
        policy = fsda::greedy_policy(trained.bundle, scenario);
      } else {
        fail(ErrorKind::Config, "simulate: unknown policy '" + name + "'");
      }
      Rng env = make_stream(seed, "simulate");
      const auto traj = market::run_episode(scenario, policy, env);
      market::write_trajectory_csv((dir / (name + "_seed" + std::to_string(seed) + ".csv")).string(), traj);
      totals.push_back(traj.total_reward);
    }
    const Stats s = stats(totals);
    summary.row(name, s.mean, s.std, s.n);
    report.push_back({{"policy", name}, {"mean_reward", s.mean}, {"std_reward", s.std}, {"n_seeds", s.n}});
  }
  out << json{{"command", "simulate"}, {"summary", report}}.dump(2) << "\n";
}

void cmd_sa_demo(const config::ExperimentConfig& config, std::ostream& out) {
  const fs::path dir = prepare_output(config);
  const auto& problem = config.single_period;
  problem.validate();
  config.sa.schedule.validate();
  std::vector<sa::SATrace> traces;
  CsvWriter runs((dir / "sa_runs.csv").string(),
                 {"seed", "final_price", "final_stock", "averaged_price", "averaged_stock"});
  std::vector<double> prices, stocks;
  for (std::uint64_t seed : config.seeds) {
    sa::SAConfig c = config.sa;
    c.seed = seed;
    traces.push_back(sa::run_two_timescale(problem, c));
    const auto& t = traces.back();
    sa::write_trace_csv((dir / ("sa_trace_seed" + std::to_string(seed) + ".csv")).string(), t);
    runs.row(static_cast<long>(seed), t.final_price, t.final_stock, t.averaged_price, t.averaged_stock);
    prices.push_back(t.averaged_price);
    stocks.push_back(t.averaged_stock);
  }
  const double p = median(prices);
  const double x = median(stocks);
  const int x_int = static_cast<int>(std::lround(x));
  const auto opt = analytic::check_optimality(problem, p, x_int);
  const auto grid = analytic::enumerate_optimum(problem, config.single_period_prices);
  json report = {{"command", "sa-demo"},
                 {"seeds", config.seeds.size()},
                 {"iterations", config.sa.iterations},
                 {"median_price", p},
                 {"median_stock", x},
                 {"median_stock_rounded", x_int},
                 {"profit_at_median", analytic::profit(problem, p, x_int)},
                 {"optimality", report_json(opt)},
                 {"enumeration", {{"price", grid.price}, {"stock", grid.stock}, {"value", grid.value}}}};
  write_json(dir / "sa_report.json", report);
  out << report.dump(2) << "\n";
}

void cmd_dp_oracle(const config::ExperimentConfig& config, std::ostream& out) {
  const fs::path dir = prepare_output(config);
  dp::DPInstance instance = dp::DPInstance::from_scenario(config.scenario);
  instance.tail_tolerance = config.dp.tail_tolerance;
  instance.budget = config.dp.budget;
  instance.demand_cap = config.dp.demand_cap;
  const auto solution = dp::backward_induction(instance);
  dp::write_solution_csv((dir / "dp_solution.csv").string(), instance, solution);

  const int pi = solution.policy.price_index[0][static_cast<std::size_t>(solution.initial_state)];
  const int qi = solution.policy.quantity_index[0][static_cast<std::size_t>(solution.initial_state)];
  json report = {{"command", "dp-oracle"},
                 {"value", solution.initial_value},
                 {"price", instance.prices[static_cast<std::size_t>(pi)]},
                 {"quantity", instance.quantities[static_cast<std::size_t>(qi)]},
                 {"updates", solution.updates},
                 {"demand_support", solution.demand_support},
                 {"tree_cost", dp::tree_cost(static_cast<int>(instance.prices.size()),
                                             static_cast<int>(instance.quantities.size()),
                                             solution.demand_support, instance.horizon)}};
  std::string status = "unchecked";
  const bool single = instance.horizon == 1 && instance.costs.lead_time == 0;
  if (single) {
    // One period: the post-order stock x0 + q against the analytic grid argmax.
    const auto grid = analytic::enumerate_optimum(config.single_period, instance.prices);
    const int stock = instance.initial_inventory + instance.quantities[static_cast<std::size_t>(qi)];
    const double tol = 1e-9 * std::max(1.0, std::abs(grid.value));
    const bool same = grid.price == instance.prices[static_cast<std::size_t>(pi)] && grid.stock == stock &&
                      std::abs(grid.value - solution.initial_value) <= tol;
    status = same ? "match" : "mismatch";
    report["reference"] = {{"kind", "enumeration"}, {"price", grid.price}, {"stock", grid.stock}, {"value", grid.value}};
  } else if (report["tree_cost"].get<double>() <= 1e7) {
    const auto tree = dp::tree_expectimax(instance);
    const double tol = 1e-10 * std::max(1.0, std::abs(tree.value));
    status = std::abs(tree.value - solution.initial_value) <= tol ? "match" : "mismatch";
    report["reference"] = {{"kind", "expectimax"}, {"value", tree.value}, {"updates", tree.updates}};
  }
  report["status"] = status;
  write_json(dir / "dp_report.json", report);
  out << report.dump(2) << "\n";
}

void cmd_train_fsda(const config::ExperimentConfig& config, std::ostream& out) {
  const fs::path dir = prepare_output(config);
  json runs = json::array();
  for (std::uint64_t seed : config.seeds) {
    const auto result = fsda::train(config.scenario, seeded(config.fsda, seed));
    const std::string tag = "fsda_seed" + std::to_string(seed);
    fsda::write_curve_csv((dir / (tag + "_curve.csv")).string(), result.curve);
    fsda::save_bundle((dir / tag).string(), result.bundle);
    fsda::SingleProductGame game(config.scenario);
    const Stats s =
        stats(fsda::evaluate(game, result.bundle, config.eval_episodes, heldout_seed(seed), config.fsda.greedy_eval));
    runs.push_back({{"seed", seed},
                    {"episodes", result.episodes},
                    {"rounds", result.rounds},
                    {"fast_updates", result.fast_updates},
                    {"slow_updates", result.slow_updates},
                    {"critic_updates", result.critic_updates},
                    {"heldout_mean", s.mean},
                    {"heldout_std", s.std},
                    {"heldout_episodes", s.n}});
  }
  json report = {{"command", "train-fsda"}, {"runs", runs}};
  write_json(dir / "fsda_report.json", report);
  out << report.dump(2) << "\n";
}

void cmd_search_baseline(const config::ExperimentConfig& config, const std::string& policy, std::ostream& out) {
  const fs::path dir = prepare_output(config);
  std::vector<std::string> kinds;
  if (policy == "all") {
    kinds = {"bslp", "ssp", "myopic"};
  } else {
    kinds = {policy};
  }
  json results = json::array();
  for (const auto& name : kinds) {
    const auto kind = baselines::parse_policy_kind(name);
    for (std::uint64_t seed : config.seeds) {
      const auto r = baselines::search_parameters(kind, config.scenario, seeded(config.search, seed));
      baselines::write_search_csv((dir / ("search_" + name + "_seed" + std::to_string(seed) + ".csv")).string(), r);
      const Stats held = stats(baselines::evaluate_policy(
          config.scenario, baselines::make_policy(r.best.params, config.scenario), config.eval_episodes,
          heldout_seed(seed)));
      results.push_back({{"policy", name},
                         {"seed", seed},
                         {"params", params_json(r.best.params, kind)},
                         {"search_mean", r.best.mean},
                         {"search_std", r.best.std},
                         {"evaluated", r.evaluated.size()},
                         {"fit", {{"kind", demand::to_string(r.fit.kind)}, {"r_squared", r.fit.r_squared}}},
                         {"heldout_mean", held.mean},
                         {"heldout_std", held.std}});
    }
  }
  json report = {{"command", "search-baseline"}, {"results", results}};
  write_json(dir / "search_report.json", report);
  out << report.dump(2) << "\n";
}

void cmd_benchmark(const config::ExperimentConfig& config, std::ostream& out) {
  require(config.policies.size() >= 2, ErrorKind::Config, "benchmark: at least two policies are required");
  require(!config.benchmark_scenarios.empty(), ErrorKind::Config, "benchmark: no scenarios configured");
  const fs::path dir = prepare_output(config);
  CsvWriter table((dir / "benchmark.csv").string(), {"scenario", "policy", "mean_reward", "std_reward", "n_seeds"});
  // wins[row][col]: scenarios where row's mean beats col's.
  const std::size_t n = config.policies.size();
  std::vector<std::vector<int>> wins(n, std::vector<int>(n, 0));
  json rows = json::array();
  for (const auto& name : config.benchmark_scenarios) {
    const auto scenario = config::preset(name).scenario;
    std::vector<double> means;
    for (const auto& policy : config.policies) {
      std::vector<double> pooled;
      for (std::uint64_t seed : config.seeds) {
        const auto r = policy_returns(policy, scenario, config, seed);
        pooled.insert(pooled.end(), r.begin(), r.end());
      }
      const Stats s = stats(pooled);
      table.row(name, policy, s.mean, s.std, config.seeds.size());
      rows.push_back({{"scenario", name},
                      {"policy", policy},
                      {"mean_reward", s.mean},
                      {"std_reward", s.std},
                      {"n_seeds", config.seeds.size()}});
      means.push_back(s.mean);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (means[i] > means[j]) ++wins[i][j];
  }
  std::vector<std::string> header{"policy"};
  header.insert(header.end(), config.policies.begin(), config.policies.end());
  CsvWriter matrix((dir / "benchmark_winloss.csv").string(), header);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> cells{config.policies[i]};
    for (std::size_t j = 0; j < n; ++j) cells.push_back(format_number(wins[i][j]));
    matrix.write_cells(cells);
  }
  out << json{{"command", "benchmark"}, {"table", rows}}.dump(2) << "\n";
}

void cmd_fit_demand(const std::string& csv_path, const std::string& kind, std::ostream& out) {
  require(!csv_path.empty(), ErrorKind::Config, "fit-demand: --csv is required");
  const auto data = demand::read_price_demand_csv(csv_path);
  std::vector<demand::FitKind> kinds;
  if (kind == "all") {
    kinds = {demand::FitKind::Linear, demand::FitKind::Exponential, demand::FitKind::IsoElasticity,
             demand::FitKind::Logit};
  } else {
    kinds = {demand::parse_fit_kind(kind)};
  }
  json fits = json::array();
  for (auto k : kinds) {
    json row = {{"kind", demand::to_string(k)}};
    try {
      const auto fit = demand::fit_demand_model(k, data);
      row["coefficients"] = fit.coefficients;
      row["r_squared"] = fit.r_squared;
      row["n"] = fit.n;
    } catch (const Error& e) {
      // A single requested kind propagates; under "all" the row records why it is empty.
      if (kind != "all" || (e.kind() != ErrorKind::Domain && e.kind() != ErrorKind::Singular)) throw;
      row["error"] = std::string(to_string(e.kind()));
      row["message"] = e.what();
    }
    fits.push_back(row);
  }
  out << json{{"command", "fit-demand"}, {"fits", fits}}.dump(2) << "\n";
}

std::string error_json(const std::exception& error) {
  std::string kind = "error";
  if (const auto* e = dynamic_cast<const Error*>(&error)) kind = std::string(to_string(e->kind()));
  return json{{"error", kind}, {"message", error.what()}}.dump();
}

int run(const Options& options, std::ostream& out, std::ostream& err) {
  try {
    if (options.command == "fit-demand") {
      cmd_fit_demand(options.csv, options.kind, out);
      return 0;
    }
    const auto config = resolve_config(options);
    if (options.command == "simulate") {
      cmd_simulate(config, out);
    } else if (options.command == "sa-demo") {
      cmd_sa_demo(config, out);
    } else if (options.command == "benchmark") {
      cmd_benchmark(config, out);
    } else if (options.command == "dp-oracle") {
      cmd_dp_oracle(config, out);
    } else if (options.command == "train-fsda") {
      cmd_train_fsda(config, out);
    } else if (options.command == "search-baseline") {
      cmd_search_baseline(config, options.policy, out);
    } else {
      fail(ErrorKind::Config, "unknown command '" + options.command + "'");
    }
    return 0;
  } catch (const std::exception& e) {
    err << error_json(e) << "\n";
    return 1;
  }
}

}  // namespace pricestock::cli
