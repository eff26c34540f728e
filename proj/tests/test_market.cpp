// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles/oracles.hpp"
#include "pricestock/config.hpp"
#include "pricestock/error.hpp"
#include "pricestock/market.hpp"
#include "pricestock/multi_product.hpp"

using namespace pricestock;
using namespace pricestock::market;

namespace {

ScenarioConfig toy(int lead_time, ShortageMode mode = ShortageMode::LostSales) {
  ScenarioConfig s;
  s.mode = mode;
  s.horizon = 12;
  s.prices = {5, 10, 15};
  s.quantities = int_range(0, 5);
  s.demand = demand::LinearizedDemandParams{};
  s.competitor = {demand::CompetitorKind::UndercutCycle, 1.0, 5.0, 15.0};
  s.costs = {1.0, 2.0, 1.0, 0.0, lead_time};
  return s;
}

Policy cycling(const ScenarioConfig& s) {
  return [&s](const MarketState& st) {
    const auto t = static_cast<std::size_t>(st.period);
    return Action{s.prices[t % s.prices.size()], s.quantities[(3 * t) % s.quantities.size()]};
  };
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("reset") {
  const auto appendix = config::preset("appendix-c").scenario;
  CHECK(reset(appendix).inventory == 0);
  const auto s3 = toy(3);
  const auto st = reset(s3);
  CHECK(st.pipeline == std::vector<int>{0, 0, 0});
  CHECK(st.period == 0);
  CHECK(st.competitor_price == s3.mid_price());
  CHECK(reset(s3) == st);
  auto bad = s3;
  bad.prices = {10, 5};
  CHECK_THROWS_AS(reset(bad), Error);
}

TEST_CASE("one lost-sales period by hand") {
  auto s = toy(1);
  MarketState st = reset(s);
  st.inventory = 3;
  st.pipeline = {2};
  Rng rng(0);
  const auto out = step_with_demand(s, st, {10, 3}, 4, rng);
  CHECK(out.sales == 4);
  CHECK(out.ending_inventory == 1);
  CHECK(out.lost == 0);
  CHECK(out.reward == 36.0);
  CHECK(out.next_state.pipeline == std::vector<int>{3});

  const auto stockout = step_with_demand(s, st, {10, 3}, 10, rng);
  CHECK(stockout.sales == 5);
  CHECK(stockout.ending_inventory == 0);
  CHECK(stockout.lost == 5);
}

TEST_CASE("fixed ordering cost is charged once per order") {
  auto s = toy(0);
  s.fixed_cost = true;
  s.costs.fixed = 7.0;
  Rng rng(0);
  const auto st = reset(s);
  const auto none = step_with_demand(s, st, {10, 0}, 0, rng);
  CHECK(none.reward == 0.0);
  const auto one = step_with_demand(s, st, {10, 1}, 0, rng);
  CHECK(one.reward == doctest::Approx(-1.0 - 1.0 - 7.0));
}

TEST_CASE("zero-order policy with no stock loses every unit") {
  auto s = toy(0);
  Rng rng = make_stream(2, "zero");
  const auto traj = run_episode(s, [](const MarketState&) { return Action{10, 0}; }, rng);
  for (const auto& step : traj.steps) {
    CHECK(step.outcome.sales == 0);
    CHECK(step.outcome.reward == -2.0 * static_cast<double>(step.outcome.demand));
  }
  CHECK(traj.discounted_return == doctest::Approx(traj.total_reward));
}

TEST_CASE("simulator invariants over random episodes") {
  for (int z : {0, 1, 3}) {
    for (auto mode : {ShortageMode::LostSales, ShortageMode::Backlog}) {
      auto s = toy(z, mode);
      s.fixed_cost = true;
      s.costs.fixed = 3.0;
      Rng rng = make_stream(static_cast<std::uint64_t>(z), "invariants");
      const auto traj = run_episode(s, cycling(s), rng);
      long ordered = 0, arrived = 0;
      for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& st = traj.steps[t];
        const auto& o = st.outcome;
        const long prev = st.state.inventory;
        const long arriving = z == 0 ? st.action.quantity : st.state.pipeline.front();
        ordered += st.action.quantity;
        arrived += arriving;
        // Reward recomputed outside the simulator.
        double r = st.action.price * static_cast<double>(o.sales) - s.costs.holding * std::max(o.ending_inventory, 0L) -
                   s.costs.shortage * static_cast<double>(o.lost) - s.costs.ordering * st.action.quantity;
        if (st.action.quantity > 0) r -= s.costs.fixed;
        CHECK(o.reward == r);
        if (mode == ShortageMode::LostSales) {
          CHECK(o.sales + o.lost == o.demand);
          CHECK(o.ending_inventory * o.lost == 0);
          CHECK(o.ending_inventory >= 0);
          if (o.lost == 0) CHECK(o.ending_inventory - prev == arriving - o.sales);
        } else {
          CHECK(o.lost == std::max(0L, -o.ending_inventory));
          CHECK(o.ending_inventory == prev + arriving - o.demand);
        }
        long in_pipe = 0;
        for (int q : o.next_state.pipeline) in_pipe += q;
        CHECK(ordered == arrived + in_pipe);
        CHECK(static_cast<int>(o.next_state.pipeline.size()) == z);
      }
    }
  }
}

TEST_CASE("backlog with free shortage serves every unit eventually") {
  auto lost = toy(0, ShortageMode::LostSales);
  auto back = toy(0, ShortageMode::Backlog);
  back.costs.shortage = lost.costs.shortage = 0.0;
  back.horizon = lost.horizon = 30;
  const auto big = [](const MarketState&) { return Action{10, 5}; };
  Rng r1 = make_stream(8, "backlog"), r2 = make_stream(8, "backlog");
  const auto a = run_episode(lost, big, r1);
  const auto b = run_episode(back, big, r2);
  long sales_b = 0, demand_b = 0, sales_a = 0;
  for (const auto& s : b.steps) {
    sales_b += s.outcome.sales;
    demand_b += s.outcome.demand;
  }
  for (const auto& s : a.steps) sales_a += s.outcome.sales;
  const long final_backlog = std::max(0L, -b.steps.back().outcome.ending_inventory);
  CHECK(sales_b + final_backlog == demand_b);
  CHECK(sales_b >= sales_a);
}

TEST_CASE("episodes are reproducible and discounting is applied from t = 1") {
  auto s = toy(2);
  s.discount = 0.9;
  Rng a = make_stream(4, "episode"), b = make_stream(4, "episode");
  const auto t1 = run_episode(s, cycling(s), a);
  const auto t2 = run_episode(s, cycling(s), b);
  double disc = 0, w = 1;
  for (std::size_t i = 0; i < t1.steps.size(); ++i) {
    CHECK(t1.steps[i].outcome.demand == t2.steps[i].outcome.demand);
    CHECK(t1.steps[i].outcome.reward == t2.steps[i].outcome.reward);
    disc += w * t1.steps[i].outcome.reward;
    w *= 0.9;
  }
  CHECK(t1.discounted_return == doctest::Approx(disc).epsilon(1e-14));

  const auto dir = std::filesystem::temp_directory_path() / "pricestock_test_market";
  std::filesystem::create_directories(dir);
  write_trajectory_csv((dir / "a.csv").string(), t1);
  write_trajectory_csv((dir / "b.csv").string(), t2);
  CHECK(slurp((dir / "a.csv").string()) == slurp((dir / "b.csv").string()));
  CHECK(slurp((dir / "a.csv").string()).rfind("t,price,qty,demand,sales,lost,inventory,reward\n", 0) == 0);
}

TEST_CASE("state encoding") {
  auto s = toy(3);
  const auto st = reset(s);
  const auto v = encode_state(st, s);
  CHECK(v.size() == 10);
  CHECK(encoded_size(s) == 10);
  CHECK(v[0] == 0.0);
  CHECK(v.minCoeff() >= 0.0);
  CHECK(v.maxCoeff() <= 1.0);
}

TEST_CASE("multi-product market") {
  const auto base = config::preset("small").scenario;
  const auto own = std::get<demand::LogisticDemandParams>(base.demand);

  SUBCASE("one product reduces to the single-product step") {
    MultiProductConfig mp{{base}, {{own}, Eigen::MatrixXd::Zero(1, 1)}};
    auto states = reset(mp);
    auto single = reset(base);
    Rng a = make_stream(1, "mp"), b = make_stream(1, "mp");
    for (int t = 0; t < 10; ++t) {
      const Action act{base.prices[static_cast<std::size_t>(t % 9)], t % 4};
      const auto m = multi_product_step(mp, states, {act}, a);
      const auto s = step(base, single, act, b);
      CHECK(m.outcomes[0].demand == s.demand);
      CHECK(m.joint_reward == s.reward);
      states = {m.outcomes[0].next_state};
      single = s.next_state;
    }
  }

  SUBCASE("no cross terms: joint reward is the sum of independent rewards") {
    MultiProductConfig mp{{base, base}, {{own, own}, Eigen::MatrixXd::Zero(2, 2)}};
    auto states = reset(mp);
    Rng rng = make_stream(2, "mp");
    const auto out = multi_product_step(mp, states, {{20, 3}, {25, 1}}, rng);
    CHECK(out.joint_reward == out.outcomes[0].reward + out.outcomes[1].reward);
    Rng ignored(0);
    const auto again0 = step_with_demand(base, states[0], {20, 3}, out.outcomes[0].demand, ignored);
    CHECK(again0.reward == out.outcomes[0].reward);
  }

  SUBCASE("symmetric products have matching demand means") {
    Eigen::MatrixXd cross(2, 2);
    cross << 0, 0.03, 0.03, 0;
    MultiProductConfig mp{{base, base}, {{own, own}, cross}};
    const auto states = reset(mp);
    oracle::Accumulator d0, d1;
    for (std::uint64_t seed = 0; seed < 100000; ++seed) {
      Rng rng = make_stream(seed, "symmetry");
      const auto out = multi_product_step(mp, states, {{20, 2}, {20, 2}}, rng);
      d0.add(static_cast<double>(out.outcomes[0].demand));
      d1.add(static_cast<double>(out.outcomes[1].demand));
    }
    const double se = std::hypot(d0.moment().se, d1.moment().se);
    CHECK(std::abs(d0.mean - d1.mean) <= 3 * se);
  }

  SUBCASE("mismatched product count") {
    MultiProductConfig mp{{base, base}, {{own, own}, Eigen::MatrixXd::Zero(2, 2)}};
    auto states = reset(mp);
    Rng rng(0);
    CHECK_THROWS_AS(multi_product_step(mp, states, {{20, 1}}, rng), Error);
  }
}
