// SPDX-License-Identifier: Apache-2.0
#include "pricestock/fsda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"

namespace pricestock::fsda {

// ---- games ---------------------------------------------------------------

SingleProductGame::SingleProductGame(market::ScenarioConfig config) : config_(std::move(config)) {
  state_ = market::reset(config_);
}

int SingleProductGame::actions(int agent) const {
  return agent == 0 ? static_cast<int>(config_.prices.size()) : static_cast<int>(config_.quantities.size());
}

void SingleProductGame::reset() { state_ = market::reset(config_); }

Vec SingleProductGame::observe() const { return market::encode_state(state_, config_); }

double SingleProductGame::step(const std::vector<int>& actions, Rng& rng) {
  const market::Action a{config_.prices.at(static_cast<std::size_t>(actions.at(0))),
                         config_.quantities.at(static_cast<std::size_t>(actions.at(1)))};
  market::StepOutcome out = market::step(config_, state_, a, rng);
  state_ = std::move(out.next_state);
  return out.reward;
}

MultiProductGame::MultiProductGame(market::MultiProductConfig config) : config_(std::move(config)) {
  states_ = market::reset(config_);
}

int MultiProductGame::actions(int agent) const {
  const auto& p = config_.products.at(static_cast<std::size_t>(agent / 2));
  return agent % 2 == 0 ? static_cast<int>(p.prices.size()) : static_cast<int>(p.quantities.size());
}

int MultiProductGame::observation_size() const {
  int n = 0;
  for (const auto& p : config_.products) n += market::encoded_size(p);
  return n;
}

void MultiProductGame::reset() { states_ = market::reset(config_); }

Vec MultiProductGame::observe() const {
  Vec v(observation_size());
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const Vec part = market::encode_state(states_[i], config_.products[i]);
    v.segment(at, part.size()) = part;
    at += part.size();
  }
  return v;
}

double MultiProductGame::step(const std::vector<int>& actions, Rng& rng) {
  require(static_cast<int>(actions.size()) == agents(), ErrorKind::Shape, "multi-product game: one action per agent");
  std::vector<market::Action> joint(config_.size());
  for (std::size_t i = 0; i < config_.size(); ++i) {
    const auto& p = config_.products[i];
    joint[i] = {p.prices.at(static_cast<std::size_t>(actions[2 * i])),
                p.quantities.at(static_cast<std::size_t>(actions[2 * i + 1]))};
  }
  last_ = market::multi_product_step(config_, states_, joint, rng);
  for (std::size_t i = 0; i < states_.size(); ++i) states_[i] = last_.outcomes[i].next_state;
  return last_.joint_reward;
}

// ---- schedule and config -------------------------------------------------

int KSchedule::operator()(long m) const {
  if (kind == Kind::Constant) return constant;
  const long k = std::max(1L, m / 2);
  return static_cast<int>(std::min<long>(k, cap));
}

void KSchedule::validate() const {
  require(constant >= 1 && cap >= 1, ErrorKind::Config, "k schedule: constant and cap must be >= 1");
}

bool slow_update_due(long m, long last_slow, const KSchedule& k) {
  return last_slow < 0 || m - last_slow >= k(m);
}

void FSDAConfig::validate() const {
  require(episodes >= 0, ErrorKind::Config, "fsda: episodes must be >= 0");
  require(episodes_per_update >= 1 && epochs >= 1, ErrorKind::Config, "fsda: batch and epochs must be >= 1");
  require(clip > 0.0 && clip < 1.0, ErrorKind::Config, "fsda: clip must lie in (0, 1)");
  require(entropy >= 0.0, ErrorKind::Config, "fsda: entropy coefficient must be >= 0");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, ErrorKind::Config, "fsda: GAE lambda must lie in [0, 1]");
  require(!discount || (*discount > 0.0 && *discount <= 1.0), ErrorKind::Config, "fsda: discount must lie in (0, 1]");
  require(lr_fast > 0.0 && lr_slow > 0.0 && lr_critic > 0.0, ErrorKind::Config, "fsda: learning rates must be > 0");
  require(max_grad_norm > 0.0, ErrorKind::Config, "fsda: max grad norm must be > 0");
  require(hidden1 >= 1 && hidden2 >= 1, ErrorKind::Config, "fsda: widths must be >= 1");
  require(eval_every >= 1 && eval_episodes >= 1, ErrorKind::Config, "fsda: evaluation cadence must be >= 1");
  k.validate();
}

AgentBundle make_bundle(const Game& game, const FSDAConfig& config) {
  AgentBundle b;
  for (int i = 0; i < game.agents(); ++i) {
    neural::NetworkSpec spec{game.observation_size(), config.hidden1, config.hidden2, game.actions(i),
                             neural::Head::Softmax, 1.0, 0.01};
    neural::Network net(spec);
    Rng rng = make_stream(config.seed, "fsda/init-actor", static_cast<std::uint64_t>(i));
    net.orthogonal_init(rng);
    b.actors.push_back(std::move(net));
    b.actor_opt.emplace_back();
    const bool pricing = i % 2 == 0;
    b.slow.push_back(pricing == (config.slow == SlowAgent::Pricing));
  }
  neural::NetworkSpec cspec{game.observation_size(), config.hidden1, config.hidden2, 1, neural::Head::Scalar, 1.0, 1.0};
  b.critic = neural::Network(cspec);
  Rng rng = make_stream(config.seed, "fsda/init-critic");
  b.critic.orthogonal_init(rng);
  return b;
}

// ---- rollouts ------------------------------------------------------------

namespace {

int pick(const Vec& probs, Rng& rng, bool greedy) {
  if (greedy) {
    Eigen::Index best = 0;
    probs.maxCoeff(&best);  // first maximum
    return static_cast<int>(best);
  }
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

Episode play(Game& game, const AgentBundle& bundle, Rng& env, Rng& act, bool greedy, bool with_values) {
  const int n = game.agents();
  const int T = game.horizon();
  Episode ep;
  ep.actions.assign(static_cast<std::size_t>(n), {});
  ep.old_prob.assign(static_cast<std::size_t>(n), {});
  std::vector<neural::HiddenState> hidden;
  for (const auto& a : bundle.actors) hidden.push_back(neural::HiddenState::zeros(a.spec()));
  neural::HiddenState critic_hidden = neural::HiddenState::zeros(bundle.critic.spec());

  game.reset();
  std::vector<int> joint(static_cast<std::size_t>(n));
  for (int t = 0; t < T; ++t) {
    Vec obs = game.observe();
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      auto r = bundle.actors[ui].forward(obs, hidden[ui]);
      hidden[ui] = std::move(r.hidden);
      joint[ui] = pick(r.output, act, greedy);
      ep.actions[ui].push_back(joint[ui]);
      ep.old_prob[ui].push_back(r.output(joint[ui]));
    }
    if (with_values) {
      auto v = bundle.critic.forward(obs, critic_hidden);
      critic_hidden = std::move(v.hidden);
      ep.values.push_back(v.output(0));
    }
    ep.observations.push_back(std::move(obs));
    const double reward = game.step(joint, env);
    ep.rewards.push_back(reward);
    ep.total_reward += reward;
  }
  return ep;
}

std::size_t step_count(const std::vector<Episode>& batch) {
  std::size_t n = 0;
  for (const auto& e : batch) n += e.rewards.size();
  return n;
}

}  // namespace

std::vector<Episode> collect_trajectories(Game& game, const AgentBundle& bundle, int count, Rng& rng, bool greedy) {
  require(static_cast<int>(bundle.actors.size()) == game.agents(), ErrorKind::Shape,
          "collect_trajectories: one actor per agent required");
  for (int i = 0; i < game.agents(); ++i)
    require(bundle.actors[static_cast<std::size_t>(i)].spec().output == game.actions(i), ErrorKind::Shape,
            "collect_trajectories: actor head width differs from the action grid");
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Rng env(mix64(rng()));
    Rng act(mix64(rng()));
    out.push_back(play(game, bundle, env, act, greedy, true));
  }
  return out;
}

std::vector<double> evaluate(Game& game, const AgentBundle& bundle, int episodes, std::uint64_t seed, bool greedy) {
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(episodes));
  for (int i = 0; i < episodes; ++i) {
    Rng env = make_stream(seed, "eval", static_cast<std::uint64_t>(i));
    Rng act = make_stream(seed, "eval/actions", static_cast<std::uint64_t>(i));
    returns.push_back(play(game, bundle, env, act, greedy, false).total_reward);
  }
  return returns;
}

market::Policy greedy_policy(const AgentBundle& bundle, const market::ScenarioConfig& config) {
  require(bundle.actors.size() == 2, ErrorKind::Shape, "greedy_policy: single-product bundle required");
  struct Memory {
    std::vector<neural::HiddenState> hidden;
  };
  auto memory = std::make_shared<Memory>();
  return [&bundle, &config, memory](const market::MarketState& state) {
    if (state.period == 0 || memory->hidden.empty()) {
      memory->hidden.clear();
      for (const auto& a : bundle.actors) memory->hidden.push_back(neural::HiddenState::zeros(a.spec()));
    }
    const Vec obs = market::encode_state(state, config);
    Rng unused(0);
    int idx[2];
    for (std::size_t i = 0; i < 2; ++i) {
      auto r = bundle.actors[i].forward(obs, memory->hidden[i]);
      memory->hidden[i] = std::move(r.hidden);
      idx[i] = pick(r.output, unused, true);
    }
    return market::Action{config.prices.at(static_cast<std::size_t>(idx[0])),
                          config.quantities.at(static_cast<std::size_t>(idx[1]))};
  };
}

// ---- estimators and losses -----------------------------------------------

GaeResult compute_gae(const std::vector<std::vector<double>>& rewards, const std::vector<std::vector<double>>& values,
                      double gamma, double lambda, bool normalize) {
  require(rewards.size() == values.size(), ErrorKind::Shape, "compute_gae: rewards and values differ in episodes");
  GaeResult g;
  g.advantages.resize(rewards.size());
  g.targets.resize(rewards.size());
  for (std::size_t e = 0; e < rewards.size(); ++e) {
    const auto& r = rewards[e];
    const auto& v = values[e];
    require(r.size() == v.size(), ErrorKind::Shape, "compute_gae: episode length mismatch");
    std::vector<double> adv(r.size());
    double running = 0.0;
    for (std::size_t t = r.size(); t-- > 0;) {
      const double next_v = t + 1 < r.size() ? v[t + 1] : 0.0;
      const double delta = r[t] + gamma * next_v - v[t];
      running = delta + gamma * lambda * running;
      adv[t] = running;
    }
    g.targets[e].resize(r.size());
    for (std::size_t t = 0; t < r.size(); ++t) g.targets[e][t] = adv[t] + v[t];
    g.advantages[e] = std::move(adv);
  }
  if (normalize) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& a : g.advantages)
      for (double x : a) {
        sum += x;
        ++n;
      }
    if (n == 0) return g;
    const double mean = sum / static_cast<double>(n);
    for (const auto& a : g.advantages)
      for (double x : a) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    for (auto& a : g.advantages)
      for (double& x : a) x = (x - mean) / (sd + 1e-8);
  }
  return g;
}

ActorLoss actor_loss(neural::Network& actor, const std::vector<Episode>& batch, int agent,
                     const std::vector<std::vector<double>>& advantages,
                     const std::vector<std::vector<double>>& factors, double clip, double entropy, bool accumulate) {
  const auto ua = static_cast<std::size_t>(agent);
  const double inv_bt = 1.0 / static_cast<double>(std::max<std::size_t>(1, step_count(batch)));
  ActorLoss out;
  out.new_prob.resize(batch.size());

  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Episode& ep = batch[e];
    const std::size_t T = ep.rewards.size();
    std::vector<neural::StepCache> caches;
    std::vector<Vec> d_out;
    if (accumulate) {
      caches.reserve(T);
      d_out.reserve(T);
    }
    neural::HiddenState h = neural::HiddenState::zeros(actor.spec());
    for (std::size_t t = 0; t < T; ++t) {
      auto r = actor.forward(ep.observations[t], h);
      h = std::move(r.hidden);
      const Vec& p = r.output;
      const int a = ep.actions[ua][t];
      const double old = ep.old_prob[ua][t];
      require(old > 0.0, ErrorKind::Contract, "actor_loss: zero probability at collection time");
      const double pa = p(a);
      out.new_prob[e].push_back(pa);

      const double fa = factors[e][t] * advantages[e][t];
      const double ratio = pa / old;
      const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
      out.clip_loss -= inv_bt * std::min(ratio * fa, clipped * fa);
      const Vec logp = p.array().max(1e-300).log();
      out.entropy_loss += entropy * inv_bt * p.dot(logp);

      if (accumulate) {
        Vec d = entropy * inv_bt * (logp.array() + 1.0).matrix();
        // The min picks the unclipped branch unless the ratio left the band
        // on the side that the advantage sign rewards.
        const bool active = fa >= 0.0 ? ratio <= 1.0 + clip : ratio >= 1.0 - clip;
        if (active) d(a) -= inv_bt * fa / old;
        caches.push_back(std::move(r.cache));
        d_out.push_back(std::move(d));
      }
    }
    if (accumulate) {
      neural::HiddenState dh{Vec::Zero(actor.spec().hidden2), Vec::Zero(actor.spec().hidden2)};
      for (std::size_t t = T; t-- > 0;) dh = actor.backward(caches[t], d_out[t], dh);
    }
  }
  return out;
}

double critic_loss(neural::Network& critic, const std::vector<Episode>& batch,
                   const std::vector<std::vector<double>>& targets, bool accumulate) {
  const double inv_bt = 1.0 / static_cast<double>(std::max<std::size_t>(1, step_count(batch)));
  double loss = 0.0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Episode& ep = batch[e];
    const std::size_t T = ep.rewards.size();
    std::vector<neural::StepCache> caches;
    std::vector<double> d_out;
    neural::HiddenState h = neural::HiddenState::zeros(critic.spec());
    for (std::size_t t = 0; t < T; ++t) {
      auto r = critic.forward(ep.observations[t], h);
      h = std::move(r.hidden);
      const double diff = r.output(0) - targets[e][t];
      loss += inv_bt * diff * diff;
      if (accumulate) {
        caches.push_back(std::move(r.cache));
        d_out.push_back(2.0 * inv_bt * diff);
      }
    }
    if (accumulate) {
      neural::HiddenState dh{Vec::Zero(critic.spec().hidden2), Vec::Zero(critic.spec().hidden2)};
      for (std::size_t t = T; t-- > 0;) dh = critic.backward(caches[t], Vec::Constant(1, d_out[t]), dh);
    }
  }
  return loss;
}

std::vector<std::vector<double>> sequential_factor_update(const std::vector<std::vector<double>>& factors,
                                                          const std::vector<std::vector<double>>& old_prob,
                                                          const std::vector<std::vector<double>>& new_prob) {
  require(factors.size() == old_prob.size() && factors.size() == new_prob.size(), ErrorKind::Shape,
          "sequential_factor_update: episode count mismatch");
  auto out = factors;
  for (std::size_t e = 0; e < out.size(); ++e) {
    require(out[e].size() == old_prob[e].size() && out[e].size() == new_prob[e].size(), ErrorKind::Shape,
            "sequential_factor_update: length mismatch");
    for (std::size_t t = 0; t < out[e].size(); ++t) {
      require(old_prob[e][t] > 0.0, ErrorKind::Contract, "sequential_factor_update: zero old probability");
      out[e][t] *= new_prob[e][t] / old_prob[e][t];
    }
  }
  return out;
}

void RewardScaler::observe_episode(const std::vector<double>& rewards) {
  double ret = 0.0;
  for (double r : rewards) {
    ret = gamma * ret + r;
    ++count;
    const double delta = ret - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (ret - mean);
  }
}

double RewardScaler::scale() const {
  if (count < 2) return 1.0;
  const double var = m2 / static_cast<double>(count);
  return var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
}

// ---- training ------------------------------------------------------------

namespace {

void clip_and_step(neural::Network& net, neural::AdamState& opt, double lr, double max_norm, const char* who,
                   long round) {
  if (!net.params.grads.allFinite()) {
    std::ostringstream os;
    os << "fsda: non-finite gradient in " << who << " at round " << round << " (parameter norm "
       << net.params.values.norm() << ")";
    fail(ErrorKind::NonFinite, os.str());
  }
  const double norm = net.params.grads.norm();
  if (norm > max_norm) net.params.grads *= max_norm / norm;
  neural::adam_step(net.params, opt, {lr, 0.9, 0.999, 1e-8});
}

void check_loss(double loss, const char* who, long round) {
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << "fsda: non-finite " << who << " loss at round " << round;
  fail(ErrorKind::NonFinite, os.str());
}

}  // namespace

TrainResult train(Game& game, const FSDAConfig& config) {
  config.validate();
  TrainResult res;
  res.bundle = make_bundle(game, config);
  AgentBundle& b = res.bundle;
  if (config.episodes == 0) return res;

  Rng rng = make_stream(config.seed, "fsda/collect");
  const std::uint64_t curve_seed = mix64(config.seed ^ hash_name("fsda/curve"));
  const double gamma = config.discount.value_or(game.discount());
  RewardScaler scaler{gamma};
  const int n_agents = game.agents();
  long last_slow = -1;

  // Slow actors first, then fast ones; index order within each group.
  std::vector<int> order;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < n_agents; ++i)
      if (b.slow[static_cast<std::size_t>(i)] == (pass == 0)) order.push_back(i);

  for (long m = 0; res.episodes < config.episodes; ++m) {
    const double anneal =
        config.anneal_lr ? 1.0 - static_cast<double>(res.episodes) / static_cast<double>(config.episodes) : 1.0;
    const int count = static_cast<int>(std::min<long>(config.episodes_per_update, config.episodes - res.episodes));
    std::vector<Episode> batch = collect_trajectories(game, b, count, rng, false);
    res.episodes += count;

    std::vector<std::vector<double>> rewards, values;
    for (const auto& ep : batch) {
      if (config.scale_rewards) scaler.observe_episode(ep.rewards);
    }
    const double s = config.scale_rewards ? scaler.scale() : 1.0;
    for (const auto& ep : batch) {
      std::vector<double> r(ep.rewards);
      for (double& x : r) x *= s;
      rewards.push_back(std::move(r));
      values.push_back(ep.values);
    }
    const GaeResult gae = compute_gae(rewards, values, gamma, config.gae_lambda, config.normalize_advantages);

    const int k = config.k(m);
    const bool slow_due = slow_update_due(m, last_slow, config.k);
    std::vector<std::vector<double>> factors(batch.size());
    for (std::size_t e = 0; e < batch.size(); ++e) factors[e].assign(batch[e].rewards.size(), 1.0);

    for (int agent : order) {
      const auto ua = static_cast<std::size_t>(agent);
      const bool is_slow = b.slow[ua];
      if (is_slow && !slow_due) continue;
      const double lr = anneal * (is_slow ? config.lr_slow / (config.slow_lr_divide_by_k ? k : 1) : config.lr_fast);
      neural::Network& actor = b.actors[ua];
      for (int epoch = 0; epoch < config.epochs; ++epoch) {
        actor.params.zero_grad();
        const ActorLoss l = actor_loss(actor, batch, agent, gae.advantages, factors, config.clip, config.entropy, true);
        check_loss(l.clip_loss + l.entropy_loss, "actor", m);
        clip_and_step(actor, b.actor_opt[ua], lr, config.max_grad_norm, "actor", m);
      }
      const ActorLoss after = actor_loss(actor, batch, agent, gae.advantages, factors, config.clip, 0.0, false);
      std::vector<std::vector<double>> old_prob(batch.size());
      for (std::size_t e = 0; e < batch.size(); ++e) old_prob[e] = batch[e].old_prob[ua];
      factors = sequential_factor_update(factors, old_prob, after.new_prob);
    }
    ++res.fast_updates;
    if (slow_due) {
      last_slow = m;
      ++res.slow_updates;
      res.slow_rounds.push_back(m);
    }

    const auto& targets = config.critic_target == CriticTarget::Gae ? gae.targets : rewards;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      b.critic.params.zero_grad();
      check_loss(critic_loss(b.critic, batch, targets, true), "critic", m);
      clip_and_step(b.critic, b.critic_opt, anneal * config.lr_critic, config.max_grad_norm, "critic", m);
    }
    ++res.critic_updates;
    res.rounds = m + 1;

    if ((m + 1) % config.eval_every == 0 || res.episodes >= config.episodes) {
      const auto returns = evaluate(game, b, config.eval_episodes, curve_seed, config.greedy_eval);
      const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
      double sq = 0.0;
      for (double r : returns) sq += (r - mean) * (r - mean);
      const double sd = returns.size() > 1 ? std::sqrt(sq / static_cast<double>(returns.size() - 1)) : 0.0;
      res.curve.push_back({res.episodes, mean, sd});
    }
  }
  return res;
}

TrainResult train(const market::ScenarioConfig& scenario, const FSDAConfig& config) {
  SingleProductGame game(scenario);
  return train(game, config);
}

TrainResult train_multi_product(const market::MultiProductConfig& scenario, const FSDAConfig& config) {
  MultiProductGame game(scenario);
  return train(game, config);
}

void write_curve_csv(const std::string& path, const std::vector<CurvePoint>& curve) {
  CsvWriter csv(path, {"episode", "mean_return", "std_return"});
  for (const auto& c : curve) csv.row(c.episode, c.mean_return, c.std_return);
}

void save_bundle(const std::string& prefix, const AgentBundle& bundle) {
  for (std::size_t i = 0; i < bundle.actors.size(); ++i)
    neural::save(prefix + ".actor" + std::to_string(i) + ".bin", bundle.actors[i]);
  neural::save(prefix + ".critic.bin", bundle.critic);
}

}  // namespace pricestock::fsda
