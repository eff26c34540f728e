// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles/gradcheck.hpp"
#include "oracles/oracles.hpp"
#include "pricestock/config.hpp"
#include "pricestock/error.hpp"
#include "pricestock/fsda.hpp"

using namespace pricestock;
using namespace pricestock::fsda;

namespace {

/// Two agents with two actions each over three periods. The reward is
/// a0 + 2 a1 plus a little noise, so the best joint action is (1, 1).
class ToyGame final : public Game {
 public:
  int agents() const override { return 2; }
  int actions(int) const override { return 2; }
  int observation_size() const override { return 2; }
  int horizon() const override { return 3; }
  double discount() const override { return 1.0; }
  void reset() override { t_ = 0; }
  Vec observe() const override { return Vec{{t_ / 3.0, 1.0}}; }
  double step(const std::vector<int>& a, Rng& rng) override {
    ++t_;
    return a.at(0) + 2.0 * a.at(1) + 0.1 * (uniform01(rng) - 0.5);
  }

 private:
  int t_ = 0;
};

FSDAConfig toy_config() {
  FSDAConfig c;
  c.hidden1 = 8;
  c.hidden2 = 8;
  c.episodes = 64;
  c.episodes_per_update = 2;
  c.epochs = 1;
  c.eval_every = 1000;
  c.eval_episodes = 2;
  return c;
}

std::vector<std::vector<double>> ones_like(const std::vector<Episode>& batch) {
  std::vector<std::vector<double>> f;
  for (const auto& e : batch) f.emplace_back(e.rewards.size(), 1.0);
  return f;
}

/// pi(a_t | s_t) recomputed by a fresh pass through the actor.
std::vector<std::vector<double>> replay_probs(const neural::Network& actor, const std::vector<Episode>& batch,
                                              int agent) {
  std::vector<std::vector<double>> out;
  for (const auto& ep : batch) {
    auto h = neural::HiddenState::zeros(actor.spec());
    std::vector<double> probs;
    for (std::size_t t = 0; t < ep.observations.size(); ++t) {
      auto f = actor.forward(ep.observations[t], h);
      probs.push_back(f.output[ep.actions[static_cast<std::size_t>(agent)][t]]);
      h = f.hidden;
    }
    out.push_back(std::move(probs));
  }
  return out;
}

void randomize(neural::Network& net, std::uint64_t seed, double scale = 0.4) {
  Rng rng = make_stream(seed, "fsda/params");
  net.params.values = oracle::random_vec(net.params.values.size(), rng, scale);
}

}  // namespace

TEST_CASE("k schedules and slow-update gating") {
  KSchedule half;
  CHECK(half(0) == 1);
  CHECK(half(3) == 1);
  CHECK(half(4) == 2);
  CHECK(half(1000) == 64);
  for (long m = 1; m < 300; ++m) CHECK(half(m) >= half(m - 1));

  KSchedule three{KSchedule::Kind::Constant, 3, 64};
  long last = -1;
  for (long m = 0; m < 60; ++m) {
    const bool due = slow_update_due(m, last, three);
    CHECK(due == (m % 3 == 0));
    if (due) last = m;
  }
  KSchedule bad{KSchedule::Kind::Constant, 0, 64};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("constant k updates both actors every round") {
  ToyGame game;
  auto c = toy_config();
  c.k = {KSchedule::Kind::Constant, 1, 64};
  const auto r = train(game, c);
  CHECK(r.rounds == 32);
  CHECK(r.fast_updates == r.rounds);
  CHECK(r.slow_updates == r.rounds);
  CHECK(r.critic_updates == r.rounds);
}

TEST_CASE("half-iteration k makes the slow actor's count sublinear") {
  ToyGame game;
  auto c = toy_config();
  c.episodes_per_update = 1;
  c.k = {KSchedule::Kind::HalfIteration, 1, 1 << 30};
  c.episodes = 256;
  const auto small = train(game, c);
  c.episodes = 1024;
  const auto large = train(game, c);
  CHECK(small.slow_updates < small.fast_updates);
  CHECK(large.slow_updates < large.fast_updates);
  // Four times the rounds, far less than twice the slow updates.
  CHECK(large.slow_updates < 2 * small.slow_updates);
  CHECK(large.fast_updates == 4 * small.fast_updates);
}

TEST_CASE("zero episodes returns the initial bundle") {
  ToyGame game;
  auto c = toy_config();
  c.episodes = 0;
  const auto r = train(game, c);
  const auto fresh = make_bundle(game, c);
  CHECK(r.rounds == 0);
  for (std::size_t i = 0; i < 2; ++i) CHECK(r.bundle.actors[i].params.values == fresh.actors[i].params.values);
  CHECK(r.bundle.critic.params.values == fresh.critic.params.values);
  CHECK(fresh.slow == std::vector<bool>{false, true});
}

TEST_CASE("collection") {
  ToyGame game;
  auto c = toy_config();
  auto b = make_bundle(game, c);
  randomize(b.actors[0], 1);
  randomize(b.actors[1], 2);

  SUBCASE("recorded probabilities match a replay") {
    Rng rng = make_stream(1, "collect");
    const auto batch = collect_trajectories(game, b, 5, rng);
    for (int agent : {0, 1}) {
      const auto replay = replay_probs(b.actors[static_cast<std::size_t>(agent)], batch, agent);
      for (std::size_t e = 0; e < batch.size(); ++e)
        for (std::size_t t = 0; t < 3; ++t)
          CHECK(std::abs(batch[e].old_prob[static_cast<std::size_t>(agent)][t] - replay[e][t]) <= 1e-10);
    }
  }
  SUBCASE("greedy collection is reproducible") {
    Rng r1 = make_stream(3, "collect"), r2 = make_stream(3, "collect");
    const auto a = collect_trajectories(game, b, 3, r1, true);
    const auto d = collect_trajectories(game, b, 3, r2, true);
    for (std::size_t e = 0; e < a.size(); ++e) {
      CHECK(a[e].actions == d[e].actions);
      CHECK(a[e].rewards == d[e].rewards);
    }
  }
  SUBCASE("uniform policies sample uniformly") {
    for (auto& a : b.actors) a.params.values.setZero();
    Rng rng = make_stream(4, "collect");
    const auto batch = collect_trajectories(game, b, 3334, rng);
    for (std::size_t agent = 0; agent < 2; ++agent) {
      long ones = 0, n = 0;
      for (const auto& ep : batch)
        for (int a : ep.actions[agent]) {
          ones += a;
          ++n;
        }
      const double sigma = std::sqrt(n * 0.25);
      CHECK(std::abs(static_cast<double>(ones) - 0.5 * static_cast<double>(n)) <= 3 * sigma);
    }
  }
}

TEST_CASE("generalized advantage estimation") {
  const std::vector<std::vector<double>> r{{1.0, -2.0, 3.0, 0.5}, {2.0, 2.0}};
  const std::vector<std::vector<double>> v{{0.3, 0.1, -0.4, 1.0}, {0.7, -0.2}};
  const double gamma = 0.9;

  const auto td = compute_gae(r, v, gamma, 0.0, false);
  for (std::size_t e = 0; e < r.size(); ++e)
    for (std::size_t t = 0; t < r[e].size(); ++t) {
      const double next = t + 1 < r[e].size() ? v[e][t + 1] : 0.0;
      CHECK(td.advantages[e][t] == r[e][t] + gamma * next - v[e][t]);
      CHECK(td.targets[e][t] == doctest::Approx(td.advantages[e][t] + v[e][t]).epsilon(1e-15));
    }

  const std::vector<std::vector<double>> zero{{0, 0, 0, 0}, {0, 0}};
  const auto mc = compute_gae(r, zero, 1.0, 1.0, false);
  CHECK(mc.advantages[0] == std::vector<double>{2.5, 1.5, 3.5, 0.5});
  CHECK(mc.advantages[1] == std::vector<double>{4.0, 2.0});

  const auto norm = compute_gae(r, v, gamma, 0.95, true);
  oracle::Accumulator acc;
  for (const auto& a : norm.advantages)
    for (double x : a) acc.add(x);
  CHECK(std::abs(acc.mean) < 1e-10);
  CHECK(std::abs(std::sqrt(acc.m2 / static_cast<double>(acc.n)) - 1.0) < 1e-6);
  // Targets come from the raw advantages.
  const auto raw = compute_gae(r, v, gamma, 0.95, false);
  CHECK(norm.targets == raw.targets);
}

TEST_CASE("actor loss") {
  ToyGame game;
  auto c = toy_config();
  auto b = make_bundle(game, c);
  randomize(b.actors[0], 5);
  Rng rng = make_stream(5, "collect");
  auto batch = collect_trajectories(game, b, 3, rng);
  const std::vector<std::vector<double>> adv{{0.5, -1.0, 2.0}, {1.5, 0.2, -0.7}, {-0.3, 0.9, 0.1}};
  const auto ones = ones_like(batch);
  auto& actor = b.actors[0];

  SUBCASE("at the collection parameters the ratio is one") {
    const auto l = actor_loss(actor, batch, 0, adv, ones, 0.2, 0.0, false);
    double sum = 0;
    for (const auto& a : adv) sum += std::accumulate(a.begin(), a.end(), 0.0);
    CHECK(l.clip_loss == doctest::Approx(-sum / 9.0).epsilon(1e-12));
    const auto wide = actor_loss(actor, batch, 0, adv, ones, 0.9, 0.0, false);
    CHECK(wide.clip_loss == l.clip_loss);
  }

  SUBCASE("finite-difference check of the full loss") {
    std::vector<std::vector<double>> factors{{1.0, 1.3, 0.8}, {1.0, 0.9, 1.1}, {1.2, 1.0, 0.7}};
    // Move away from the collection parameters so the ratios differ from one
    // while staying inside the clip band.
    actor.params.values *= 1.02;
    actor.params.zero_grad();
    actor_loss(actor, batch, 0, adv, factors, 0.2, 0.05, true);
    const Vec grads = actor.params.grads;
    auto loss = [&] {
      const auto l = actor_loss(actor, batch, 0, adv, factors, 0.2, 0.05, false);
      return l.clip_loss + l.entropy_loss;
    };
    oracle::GradReport rep;
    oracle::check_vector(rep, actor.params.values, grads, loss, 1e-5, 1e-4, "theta");
    INFO("worst " << rep.worst << " at " << rep.where);
    CHECK(rep.failed == 0);
  }

  SUBCASE("an active clip zeroes the gradient") {
    for (auto& ep : batch)
      for (double& p : ep.old_prob[0]) p *= 0.1;  // ratio 10 > 1 + eps
    const std::vector<std::vector<double>> pos{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
    actor.params.zero_grad();
    const auto l = actor_loss(actor, batch, 0, pos, ones, 0.2, 0.0, true);
    CHECK(l.clip_loss == doctest::Approx(-1.2).epsilon(1e-12));
    CHECK(actor.params.grads.isZero());
  }

  SUBCASE("zero old probability is a contract error") {
    batch[1].old_prob[0][2] = 0.0;
    CHECK_THROWS_AS(actor_loss(actor, batch, 0, adv, ones, 0.2, 0.0, false), Error);
  }

  SUBCASE("entropy term") {
    actor.params.values.setZero();
    const auto l = actor_loss(actor, batch, 0, adv, ones, 0.2, 0.5, false);
    CHECK(l.entropy_loss == doctest::Approx(0.5 * -std::log(2.0)).epsilon(1e-12));

    actor.params.values.setZero();
    actor.params.matrix(actor.layout().out_b)(0, 0) = 40.0;
    const auto sharp = actor_loss(actor, batch, 0, adv, ones, 0.2, 0.5, false);
    CHECK(sharp.entropy_loss <= 0.0);
    CHECK(sharp.entropy_loss > -1e-12);

    // Entropy alone pushes a skewed policy toward uniform.
    randomize(actor, 6, 1.0);
    const std::vector<std::vector<double>> none{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    const double before = actor_loss(actor, batch, 0, none, ones, 0.2, 1.0, false).entropy_loss;
    neural::AdamState opt;
    for (int i = 0; i < 100; ++i) {
      actor.params.zero_grad();
      actor_loss(actor, batch, 0, none, ones, 0.2, 1.0, true);
      neural::adam_step(actor.params, opt, {1e-2, 0.9, 0.999, 1e-8});
    }
    CHECK(actor_loss(actor, batch, 0, none, ones, 0.2, 1.0, false).entropy_loss < before);
  }
}

TEST_CASE("sequential update factors") {
  const std::vector<std::vector<double>> f1{{1, 1, 1}};
  const std::vector<std::vector<double>> old{{0.5, 0.25, 0.4}};
  CHECK(sequential_factor_update(f1, old, old) == f1);
  const auto f2 = sequential_factor_update(f1, old, {{0.5, 0.5, 0.4}});
  CHECK(f2[0] == std::vector<double>{1, 2, 1});

  SUBCASE("after updating the first actor the factor is its probability ratio") {
    ToyGame game;
    auto c = toy_config();
    auto b = make_bundle(game, c);
    Rng rng = make_stream(7, "collect");
    const auto batch = collect_trajectories(game, b, 4, rng);
    const auto ones = ones_like(batch);
    for (const auto& row : ones)
      for (double f : row) CHECK(f == 1.0);
    const std::vector<std::vector<double>> adv{{1, -1, 0.5}, {0.3, 0.2, -2}, {1, 1, 1}, {-1, 0, 2}};
    auto& first = b.actors[1];  // the slow actor updates first
    for (int i = 0; i < 5; ++i) {
      first.params.zero_grad();
      actor_loss(first, batch, 1, adv, ones, 0.2, 0.0, true);
      neural::adam_step(first.params, b.actor_opt[1], {1e-2, 0.9, 0.999, 1e-8});
    }
    const auto after = actor_loss(first, batch, 1, adv, ones, 0.2, 0.0, false);
    std::vector<std::vector<double>> old_prob;
    for (const auto& ep : batch) old_prob.push_back(ep.old_prob[1]);
    const auto factors = sequential_factor_update(ones, old_prob, after.new_prob);
    const auto replay = replay_probs(first, batch, 1);
    bool moved = false;
    for (std::size_t e = 0; e < batch.size(); ++e)
      for (std::size_t t = 0; t < 3; ++t) {
        CHECK(factors[e][t] == after.new_prob[e][t] / old_prob[e][t]);
        CHECK(factors[e][t] == doctest::Approx(replay[e][t] / old_prob[e][t]).epsilon(1e-12));
        CHECK(factors[e][t] > 0.0);
        moved = moved || factors[e][t] != 1.0;
      }
    CHECK(moved);
  }
}

TEST_CASE("critic loss") {
  ToyGame game;
  auto c = toy_config();
  auto b = make_bundle(game, c);
  Rng rng = make_stream(8, "collect");
  const auto batch = collect_trajectories(game, b, 3, rng);

  std::vector<std::vector<double>> own;
  for (const auto& ep : batch) own.push_back(ep.values);
  CHECK(critic_loss(b.critic, batch, own, false) == doctest::Approx(0.0).epsilon(1e-15));

  b.critic.params.values.setZero();
  const std::vector<std::vector<double>> seven(3, std::vector<double>(3, 7.0));
  CHECK(critic_loss(b.critic, batch, seven, false) == doctest::Approx(49.0).epsilon(1e-14));

  randomize(b.critic, 9);
  b.critic.params.zero_grad();
  critic_loss(b.critic, batch, seven, true);
  const Vec grads = b.critic.params.grads;
  oracle::GradReport rep;
  oracle::check_vector(rep, b.critic.params.values, grads, [&] { return critic_loss(b.critic, batch, seven, false); },
                       1e-5, 1e-4, "phi");
  INFO("worst " << rep.worst << " at " << rep.where);
  CHECK(rep.failed == 0);
}

TEST_CASE("reward scaler divides by the running std of the discounted return") {
  RewardScaler s{0.9};
  CHECK(s.scale() == 1.0);
  const std::vector<double> ep1{1, 2, 3}, ep2{-1, 4};
  s.observe_episode(ep1);
  s.observe_episode(ep2);
  oracle::Accumulator acc;
  for (const auto* ep : {&ep1, &ep2}) {
    double ret = 0;
    for (double r : *ep) acc.add(ret = 0.9 * ret + r);
  }
  CHECK(s.scale() == doctest::Approx(1.0 / std::sqrt(acc.m2 / acc.n)).epsilon(1e-12));
}

TEST_CASE("training") {
  SUBCASE("identical seeds give identical bundles") {
    ToyGame g1, g2;
    const auto a = train(g1, toy_config());
    const auto b = train(g2, toy_config());
    CHECK(a.bundle.actors[0].params.values == b.bundle.actors[0].params.values);
    CHECK(a.bundle.critic.params.values == b.bundle.critic.params.values);
  }

  SUBCASE("reward scaling leaves the learned greedy action alone") {
    auto c = toy_config();
    c.episodes = 300;
    c.epochs = 4;
    c.lr_fast = c.lr_slow = c.lr_critic = 1e-2;
    c.k = {KSchedule::Kind::Constant, 1, 64};
    std::vector<std::vector<int>> greedy;
    for (bool scale : {true, false}) {
      c.scale_rewards = scale;
      ToyGame g;
      const auto r = train(g, c);
      Rng rng(0);
      greedy.push_back(collect_trajectories(g, r.bundle, 1, rng, true)[0].actions[0]);
      CHECK(greedy.back() == std::vector<int>{1, 1, 1});
    }
    CHECK(greedy[0] == greedy[1]);
  }

  SUBCASE("greedy policy replays the greedy evaluation") {
    const auto scenario = config::preset("small").scenario;
    auto c = toy_config();
    c.episodes = 8;
    const auto r = train(scenario, c);
    SingleProductGame game(scenario);
    const auto returns = evaluate(game, r.bundle, 4, 11, true);
    const auto policy = greedy_policy(r.bundle, scenario);
    for (int i = 0; i < 4; ++i) {
      Rng env = make_stream(11, "eval", static_cast<std::uint64_t>(i));
      CHECK(market::run_episode(scenario, policy, env).total_reward == returns[static_cast<std::size_t>(i)]);
    }
  }

  SUBCASE("one product behaves like the single-product game") {
    const auto scenario = config::preset("small").scenario;
    const auto own = std::get<demand::LogisticDemandParams>(scenario.demand);
    market::MultiProductConfig mp{{scenario}, {{own}, Eigen::MatrixXd::Zero(1, 1)}};
    auto c = toy_config();
    c.episodes = 8;
    c.eval_every = 1;
    const auto single = train(scenario, c);
    const auto multi = train_multi_product(mp, c);
    REQUIRE(single.curve.size() == multi.curve.size());
    for (std::size_t i = 0; i < single.curve.size(); ++i)
      CHECK(single.curve[i].mean_return == multi.curve[i].mean_return);
    CHECK(single.bundle.actors[1].params.values == multi.bundle.actors[1].params.values);
  }

  SUBCASE("parameters stay finite on the small scenario") {
    auto c = toy_config();
    c.episodes = 200;
    c.epochs = 4;
    const auto r = train(config::preset("small").scenario, c);
    for (const auto& a : r.bundle.actors) CHECK(a.params.values.allFinite());
    CHECK(r.bundle.critic.params.values.allFinite());
    for (const auto& p : r.curve) CHECK(std::isfinite(p.mean_return));
  }

  SUBCASE("invalid configurations") {
    auto c = toy_config();
    c.clip = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
    c = toy_config();
    c.discount = 0.0;
    CHECK_THROWS_AS(c.validate(), Error);
  }
}
