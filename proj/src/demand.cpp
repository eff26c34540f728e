// SPDX-License-Identifier: Apache-2.0
#include "pricestock/demand.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pricestock/error.hpp"

namespace pricestock::demand {

Regressors regressors(const MarketContext& ctx) {
  const double p = ctx.own_price;
  const double o = ctx.competitor_price;
  const double j = ctx.reference_price;
  // Rank among the two prices: 1 cheapest, 2 dearest, 1.5 on a tie. Exact
  // floating equality, so prices on a discrete grid tie deterministically.
  const double rank = 1.0 + (o < p ? 1.0 : 0.0) + (o == p ? 0.5 : 0.0);
  Regressors k;
  k << 1.0, rank, o - p, 1.0, (p + o) / 2.0, p - j;
  return k;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void LogisticDemandParams::validate() const {
  require(eta > 0.0 && std::isfinite(eta), ErrorKind::Config, "logistic demand: eta must be > 0");
  require(delta > 0.0 && delta <= 1.0, ErrorKind::Config, "logistic demand: delta must lie in (0, 1]");
  require(beta.allFinite(), ErrorKind::Config, "logistic demand: beta must be finite");
}

double logistic_rate(double eta, double delta, double logit) {
  return eta * delta * stable_sigmoid(logit);
}

double demand_rate_logistic(const LogisticDemandParams& params, const MarketContext& ctx) {
  return logistic_rate(params.eta, params.delta, regressors(ctx).dot(params.beta));
}

void LinearizedDemandParams::validate(double p_lo, double p_hi) const {
  require(eta > 0.0 && delta > 0.0 && delta <= 1.0, ErrorKind::Config,
          "linearized demand: need eta > 0 and delta in (0, 1]");
  require(l < 0.0, ErrorKind::Config, "linearized demand: slope l must be negative");
  // 1 + l p is decreasing in p, so the upper end is binding.
  require(1.0 + l * std::max(p_lo, p_hi) > 0.0, ErrorKind::Config,
          "linearized demand: 1 + l*p must stay positive on the price domain");
}

double LinearizedDemandParams::scale() const { return eta * delta * std::exp(a); }

double lambda_linearized(const LinearizedDemandParams& params, double price) {
  const double factor = 1.0 + params.l * price;
  if (!(factor > 0.0)) {
    std::ostringstream os;
    os << "linearized demand: 1 + l*p = " << factor << " <= 0 at p = " << price;
    fail(ErrorKind::Domain, os.str());
  }
  return params.scale() * factor;
}

double lambda_linearized_slope(const LinearizedDemandParams& params) {
  return params.scale() * params.l;
}

void EmpiricalDemandTable::validate() const {
  require(!prices.empty() && prices.size() == rates.size(), ErrorKind::Config,
          "empirical demand: prices and rates must be non-empty and equally long");
  for (std::size_t i = 1; i < prices.size(); ++i)
    require(prices[i] > prices[i - 1], ErrorKind::Config, "empirical demand: prices must increase");
  for (double r : rates)
    require(r >= 0.0 && std::isfinite(r), ErrorKind::Config, "empirical demand: rates must be >= 0");
}

double empirical_rate(const EmpiricalDemandTable& table, double price) {
  const auto& xs = table.prices;
  if (price <= xs.front()) return table.rates.front();
  if (price >= xs.back()) return table.rates.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), price) - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (price - xs[lo]) / (xs[hi] - xs[lo]);
  return (1.0 - w) * table.rates[lo] + w * table.rates[hi];
}

namespace {
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

double rate(const DemandModel& model, const MarketContext& ctx) {
  return std::visit(
      Overloaded{
          [&](const LogisticDemandParams& m) { return demand_rate_logistic(m, ctx); },
          [&](const LinearizedDemandParams& m) { return lambda_linearized(m, ctx.own_price); },
          [&](const EmpiricalDemandTable& m) { return empirical_rate(m, ctx.own_price); },
      },
      model);
}

std::string model_name(const DemandModel& model) {
  return std::visit(Overloaded{
                        [](const LogisticDemandParams&) { return std::string("logistic"); },
                        [](const LinearizedDemandParams&) { return std::string("linearized"); },
                        [](const EmpiricalDemandTable&) { return std::string("empirical"); },
                    },
                    model);
}

long sample_demand(double rate, Rng& rng) {
  require(std::isfinite(rate) && rate >= 0.0, ErrorKind::Domain, "sample_demand: rate must be finite and >= 0");
  if (rate == 0.0) return 0;
  if (rate > 700.0) {
    // e^{-rate} underflows; fall back to the library sampler.
    std::poisson_distribution<long> dist(rate);
    return dist(rng);
  }
  const double u = uniform01(rng);
  double pmf = std::exp(-rate);
  double cdf = pmf;
  long k = 0;
  while (u >= cdf) {
    ++k;
    pmf *= rate / static_cast<double>(k);
    cdf += pmf;
    if (pmf == 0.0) break;  // rounding left cdf just short of 1
  }
  return k;
}

void CompetitorStrategy::validate() const {
  require(p_min < p_max, ErrorKind::Config, "competitor: p_min must be < p_max");
  if (kind == CompetitorKind::UndercutCycle)
    require(decrement > 0.0, ErrorKind::Config, "competitor: undercut decrement must be > 0");
}

double competitor_next_price(const CompetitorStrategy& strategy, double our_price,
                             double current, Rng& rng) {
  switch (strategy.kind) {
    case CompetitorKind::UndercutCycle: {
      const double next = std::min(our_price, current) - strategy.decrement;
      // At the floor the competitor restarts from the top of the range.
      if (next < strategy.p_min) return strategy.p_max;
      return std::max(strategy.p_min, next);
    }
    case CompetitorKind::UniformRandom:
      return uniform(rng, strategy.p_min, strategy.p_max);
    case CompetitorKind::Fixed:
      return current;
  }
  return current;
}

double update_reference_price(double reference, double own_price, double competitor_price,
                              double smoothing) {
  require(smoothing >= 0.0 && smoothing <= 1.0, ErrorKind::Config,
          "reference price smoothing must lie in [0, 1]");
  return (1.0 - smoothing) * reference + smoothing * (own_price + competitor_price) / 2.0;
}

}  // namespace pricestock::demand
