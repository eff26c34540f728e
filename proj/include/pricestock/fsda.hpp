// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pricestock/market.hpp"
#include "pricestock/multi_product.hpp"
#include "pricestock/neural.hpp"

namespace pricestock::fsda {

using neural::Vec;

/// Cooperative game with one shared reward. Agents 2i and 2i+1 set the price
/// and the order quantity of product i; every actor sees the global state.
class Game {
 public:
  virtual ~Game() = default;
  virtual int agents() const = 0;
  virtual int actions(int agent) const = 0;
  virtual int observation_size() const = 0;
  virtual int horizon() const = 0;
  virtual double discount() const = 0;
  virtual void reset() = 0;
  virtual Vec observe() const = 0;
  /// Applies the joint action (grid indices) and returns the joint reward.
  virtual double step(const std::vector<int>& actions, Rng& rng) = 0;
};

class SingleProductGame final : public Game {
 public:
  explicit SingleProductGame(market::ScenarioConfig config);
  int agents() const override { return 2; }
  int actions(int agent) const override;
  int observation_size() const override { return market::encoded_size(config_); }
  int horizon() const override { return config_.horizon; }
  double discount() const override { return config_.discount; }
  void reset() override;
  Vec observe() const override;
  double step(const std::vector<int>& actions, Rng& rng) override;

  const market::MarketState& state() const { return state_; }
  const market::ScenarioConfig& config() const { return config_; }

 private:
  market::ScenarioConfig config_;
  market::MarketState state_;
};

class MultiProductGame final : public Game {
 public:
  explicit MultiProductGame(market::MultiProductConfig config);
  int agents() const override { return 2 * static_cast<int>(config_.size()); }
  int actions(int agent) const override;
  int observation_size() const override;
  int horizon() const override { return config_.products.front().horizon; }
  double discount() const override { return config_.products.front().discount; }
  void reset() override;
  Vec observe() const override;
  double step(const std::vector<int>& actions, Rng& rng) override;

  const market::MultiStepOutcome& last_outcome() const { return last_; }

 private:
  market::MultiProductConfig config_;
  std::vector<market::MarketState> states_;
  market::MultiStepOutcome last_;
};

enum class SlowAgent { Pricing, Replenishment };
enum class CriticTarget { Gae, Reward };

/// k(m): constant, or max(1, floor(m / 2)) capped at `cap`.
struct KSchedule {
  enum class Kind { Constant, HalfIteration } kind = Kind::HalfIteration;
  int constant = 1;
  int cap = 64;

  int operator()(long m) const;
  void validate() const;
};

/// Fires when at least k(m) iterations have passed since the previous slow
/// update (at m = 0 always). For constant k this is m mod k == 0.
bool slow_update_due(long m, long last_slow, const KSchedule& k);

struct FSDAConfig {
  long episodes = 2000;         // total training episodes M
  int episodes_per_update = 4;  // B: episodes per collection/update round
  int epochs = 4;               // gradient passes over each batch
  double clip = 0.2;
  double entropy = 0.01;  // beta_E
  double gae_lambda = 0.95;
  std::optional<double> discount;  // overrides the game's gamma for GAE and reward scaling
  double lr_fast = 3e-4;
  double lr_slow = 3e-4;
  double lr_critic = 3e-4;
  bool slow_lr_divide_by_k = true;
  bool anneal_lr = false;  // scale every learning rate by the unused share of the episode budget
  double max_grad_norm = 0.5;
  KSchedule k;
  SlowAgent slow = SlowAgent::Replenishment;
  CriticTarget critic_target = CriticTarget::Gae;
  bool normalize_advantages = true;
  bool scale_rewards = true;
  int hidden1 = 64;
  int hidden2 = 64;
  int eval_every = 25;     // rounds between learning-curve points
  int eval_episodes = 10;
  bool greedy_eval = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AgentBundle {
  std::vector<neural::Network> actors;
  std::vector<neural::AdamState> actor_opt;
  std::vector<bool> slow;  // role per actor
  neural::Network critic;
  neural::AdamState critic_opt;
};

/// Orthogonally initialised actors (one per game agent) and a global critic.
AgentBundle make_bundle(const Game& game, const FSDAConfig& config);

struct Episode {
  std::vector<Vec> observations;              // s_t, t = 0..T-1
  std::vector<std::vector<int>> actions;      // [agent][t]
  std::vector<std::vector<double>> old_prob;  // [agent][t], pi_old(a_t | s_t)
  std::vector<double> rewards;                // joint reward r_t
  std::vector<double> values;                 // critic v(s_t) at collection
  double total_reward = 0.0;
};

/// Runs `count` episodes with the joint policy; hidden states start at zero
/// in each episode. Greedy decoding picks the argmax (lowest index on ties).
std::vector<Episode> collect_trajectories(Game& game, const AgentBundle& bundle, int count, Rng& rng,
                                          bool greedy = false);

struct GaeResult {
  std::vector<std::vector<double>> advantages;
  std::vector<std::vector<double>> targets;  // advantage + value
};

/// Episodes end after their last reward (no bootstrap beyond the horizon).
/// With `normalize` the advantages are shifted and scaled to zero mean and unit
/// variance over the whole batch; targets use the raw advantages.
GaeResult compute_gae(const std::vector<std::vector<double>>& rewards,
                      const std::vector<std::vector<double>>& values, double gamma, double lambda, bool normalize);

struct ActorLoss {
  double clip_loss = 0.0;
  double entropy_loss = 0.0;
  std::vector<std::vector<double>> new_prob;  // [episode][t], pi_new(a_t | s_t)
};

/// -(1/BT) sum min(rho F A, clip(rho, 1-eps, 1+eps) F A)
///   + beta_E (1/BT) sum_t sum_a pi log pi,
/// with rho = pi_new / pi_old. Gradients accumulate into the actor's grads
/// when `accumulate` is set (BPTT over each episode).
ActorLoss actor_loss(neural::Network& actor, const std::vector<Episode>& batch, int agent,
                     const std::vector<std::vector<double>>& advantages,
                     const std::vector<std::vector<double>>& factors, double clip, double entropy, bool accumulate);

/// (1/BT) sum (v(s_t) - target_t)^2, gradients accumulate when `accumulate`.
double critic_loss(neural::Network& critic, const std::vector<Episode>& batch,
                   const std::vector<std::vector<double>>& targets, bool accumulate);

/// F^{i+1}_t = F^i_t * pi_new / pi_old.
std::vector<std::vector<double>> sequential_factor_update(const std::vector<std::vector<double>>& factors,
                                                          const std::vector<std::vector<double>>& old_prob,
                                                          const std::vector<std::vector<double>>& new_prob);

/// Welford running variance of the discounted return; rewards are divided by
/// its standard deviation.
struct RewardScaler {
  double gamma = 1.0;
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void observe_episode(const std::vector<double>& rewards);
  double scale() const;
};

struct CurvePoint {
  long episode = 0;
  double mean_return = 0.0;
  double std_return = 0.0;
};

struct TrainResult {
  AgentBundle bundle;
  std::vector<CurvePoint> curve;
  long rounds = 0;
  long episodes = 0;
  long fast_updates = 0;
  long slow_updates = 0;
  long critic_updates = 0;
  std::vector<long> slow_rounds;  // rounds m at which the slow actors updated
};

/// Training loop over rounds m = 0, 1, ...: collect, GAE, actor updates (slow
/// actors first and only when due, fast actors every round with the chained F
/// factors), critic every round. Throws NonFinite if a loss diverges.
TrainResult train(Game& game, const FSDAConfig& config);
TrainResult train(const market::ScenarioConfig& scenario, const FSDAConfig& config);
TrainResult train_multi_product(const market::MultiProductConfig& scenario, const FSDAConfig& config);

/// Per-episode total rewards on evaluation streams make_stream(seed, "eval", i).
std::vector<double> evaluate(Game& game, const AgentBundle& bundle, int episodes, std::uint64_t seed, bool greedy);

/// Greedy single-product policy for market::run_episode; the recurrent state
/// restarts whenever the market is at period 0. Matches evaluate(..., greedy).
market::Policy greedy_policy(const AgentBundle& bundle, const market::ScenarioConfig& config);

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve);
void save_bundle(const std::string& prefix, const AgentBundle& bundle);

}  // namespace pricestock::fsda
