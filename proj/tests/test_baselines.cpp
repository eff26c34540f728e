// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "pricestock/analytic.hpp"
#include "pricestock/config.hpp"
#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"
#include "pricestock/baselines.hpp"

using namespace pricestock;
using namespace pricestock::baselines;

namespace {

market::ScenarioConfig small() { return config::preset("small").scenario; }

market::MarketState with_stock(const market::ScenarioConfig& s, long on_hand, std::vector<int> pipeline = {}) {
  auto st = market::reset(s);
  st.inventory = on_hand;
  if (!pipeline.empty()) st.pipeline = std::move(pipeline);
  return st;
}

}  // namespace

TEST_CASE("bslp rule") {
  auto s = small();  // z = 1, prices 10..30 in steps of 2.5
  const BSLPParams p{5, 25.0, 2.5};
  auto a = act_bslp(p, with_stock(s, 0, {0}), s);
  CHECK(a.quantity == 5);
  CHECK(a.price == 25.0);
  a = act_bslp(p, with_stock(s, 3, {2}), s);  // position equals y*
  CHECK(a.quantity == 0);
  CHECK(a.price == 25.0);
  a = act_bslp(p, with_stock(s, 8, {0}), s);
  CHECK(a.quantity == 0);
  CHECK(a.price <= 25.0);
  CHECK(a.price == 17.5);
  // The pipeline counts toward the position.
  CHECK(act_bslp(p, with_stock(s, 1, {3}), s).quantity == 1);

  const BSLPParams pure{0, 20.0, 0.0};
  for (long x : {0L, 4L, 11L}) {
    CHECK(act_bslp(pure, with_stock(s, x, {0}), s).quantity == 0);
    CHECK(act_bslp(pure, with_stock(s, x, {0}), s).price == 20.0);
  }
}

TEST_CASE("ssp rule") {
  auto s = small();
  const SSPParams p{4, 10, 30.0, -1.0};
  CHECK(act_ssp(p, with_stock(s, 3, {0}), s).quantity == 7);
  CHECK(act_ssp(p, with_stock(s, 4, {0}), s).quantity == 0);
  // On-hand only: a full pipeline does not suppress the order.
  CHECK(act_ssp(p, with_stock(s, 1, {12}), s).quantity == 9);
  double prev = 1e9;
  for (long x = 0; x < 30; ++x) {
    const double price = act_ssp(p, with_stock(s, x, {0}), s).price;
    CHECK(price <= prev);
    prev = price;
  }
}

TEST_CASE("myopic rule") {
  auto s = small();
  const MyopicParams w0{6, 0.0, 30.0, -1.0};
  CHECK(act_myopic(w0, with_stock(s, 2, {9}), s).quantity == 4);
  const MyopicParams w1{6, 1.0, 30.0, -1.0};
  CHECK(act_myopic(w1, with_stock(s, 2, {9}), s).quantity == 0);
  CHECK(act_myopic(w1, with_stock(s, 6, {0}), s).quantity == 0);
  double prev = 1e9;
  for (long x = 0; x < 40; ++x) {
    const auto a = act_myopic(w1, with_stock(s, x, {0}), s);
    CHECK(a.price <= prev);
    CHECK(a.price >= s.prices.front());
    prev = a.price;
  }
}

TEST_CASE("policies are stationary") {
  auto s = small();
  const std::vector<BaselineParams> all{BSLPParams{6, 22.5, 1.0}, SSPParams{3, 9, 27.5, -0.5},
                                        MyopicParams{7, 0.5, 28.0, -0.8}};
  for (const auto& params : all) {
    const auto policy = make_policy(params, s);
    auto st = with_stock(s, 4, {2});
    const auto a = policy(st);
    for (int t : {1, 7, 19}) {
      st.period = t;
      const auto b = policy(st);
      CHECK(a.price == b.price);
      CHECK(a.quantity == b.quantity);
    }
  }
}

TEST_CASE("snapping to the grids") {
  auto s = small();
  CHECK(snap_price(s, 11.25) == 10.0);  // tie goes to the lower price
  CHECK(snap_price(s, 100) == 30.0);
  CHECK(snap_price(s, -4) == 10.0);
  CHECK(snap_quantity(s, 40) == 12);
  CHECK(snap_quantity(s, -2) == 0);
  CHECK(inventory_position(with_stock(s, 3, {4})) == 7);
}

TEST_CASE("evaluation shares demand paths across policies") {
  auto s = small();
  const auto policy = make_policy(BSLPParams{6, 22.5, 1.0}, s);
  const auto a = evaluate_policy(s, policy, 5, 3);
  const auto b = evaluate_policy(s, policy, 5, 3);
  CHECK(a == b);
  for (int i = 0; i < 5; ++i) {
    Rng env = make_stream(3, "eval", static_cast<std::uint64_t>(i));
    CHECK(market::run_episode(s, policy, env).total_reward == a[static_cast<std::size_t>(i)]);
  }
  CHECK(evaluate_random(s, 5, 3) == evaluate_random(s, 5, 3));
}

TEST_CASE("search") {
  auto s = small();
  SearchConfig sc;
  sc.episodes = 10;
  sc.fit_samples = 2000;

  SUBCASE("a one-point grid returns that point") {
    sc.grids = SearchGrids{{7}, {22.5}, {1.0}, {0.5}};
    for (auto kind : {PolicyKind::BSLP, PolicyKind::Myopic}) {
      const auto r = search_parameters(kind, s, sc);
      CHECK(r.evaluated.size() == 1);
    }
    const auto r = search_parameters(PolicyKind::BSLP, s, sc);
    const auto& best = std::get<BSLPParams>(r.best.params);
    CHECK(best.base_stock == 7);
    CHECK(best.list_price == 22.5);
    CHECK(best.markdown == 1.0);
  }

  SUBCASE("enlarging the grid never lowers the best mean") {
    SearchGrids narrow{{4, 8}, {20, 25}, {0.0}, {1.0}};
    SearchGrids wide{{2, 4, 6, 8, 10}, {17.5, 20, 25, 27.5}, {0.0, 1.0}, {0.0, 1.0}};
    sc.budget = 10000;
    for (auto kind : {PolicyKind::BSLP, PolicyKind::SSP, PolicyKind::Myopic}) {
      sc.grids = narrow;
      const auto a = search_parameters(kind, s, sc);
      sc.grids = wide;
      const auto b = search_parameters(kind, s, sc);
      CHECK(b.best.mean >= a.best.mean);
    }
  }

  SUBCASE("search is deterministic and exports one row per candidate") {
    sc.grids = SearchGrids{{4, 8}, {20, 25}, {0.0, 1.0}, {1.0}};
    const auto a = search_parameters(PolicyKind::SSP, s, sc);
    const auto b = search_parameters(PolicyKind::SSP, s, sc);
    CHECK(a.best.mean == b.best.mean);
    CHECK(a.best.grid_index == b.best.grid_index);
    const auto dir = std::filesystem::temp_directory_path() / "pricestock_test_baselines";
    std::filesystem::create_directories(dir);
    write_search_csv((dir / "ssp.csv").string(), a);
    const auto table = read_csv((dir / "ssp.csv").string());
    CHECK(table.rows.size() == a.evaluated.size());
    CHECK(table.header.back() == "std_return");
  }

  SUBCASE("empty grids are rejected") {
    sc.grids = SearchGrids{{}, {20}, {0.0}, {1.0}};
    CHECK_THROWS_AS(search_parameters(PolicyKind::BSLP, s, sc), Error);
    SearchConfig zero;
    zero.budget = 0;
    CHECK_THROWS_AS(zero.validate(), Error);
  }
}

TEST_CASE("single-period bslp matches the analytic optimum") {
  const auto s = config::preset("appendix-c").scenario;
  REQUIRE(s.horizon == 1);
  REQUIRE(s.costs.lead_time == 0);
  SearchConfig sc;
  sc.episodes = 4000;
  sc.fit_samples = 2000;
  SearchGrids g;
  g.stocks = market::int_range(0, 20);
  for (double p = 40; p <= 70; p += 1) g.prices.push_back(p);
  g.slopes = {0.0};
  g.weights = {1.0};
  sc.grids = g;
  sc.budget = static_cast<int>(g.stocks.size() * g.prices.size());
  const auto r = search_parameters(PolicyKind::BSLP, s, sc);
  const auto& best = std::get<BSLPParams>(r.best.params);

  const auto problem = analytic::SinglePeriodProblem::appendix_c();
  const auto grid = analytic::enumerate_optimum(problem, s.prices);
  CHECK(std::abs(best.base_stock - grid.stock) <= 1);
  CHECK(std::abs(best.list_price - grid.price) <= 1.0);
}
