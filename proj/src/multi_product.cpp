// SPDX-License-Identifier: Apache-2.0
#include "pricestock/multi_product.hpp"

#include "pricestock/error.hpp"

namespace pricestock::market {

void CrossDemandModel::validate() const {
  require(!own.empty(), ErrorKind::Config, "cross demand: no products");
  require(cross.rows() == static_cast<Eigen::Index>(own.size()) && cross.cols() == cross.rows(), ErrorKind::Config,
          "cross demand: cross matrix must be N x N");
  for (const auto& p : own) p.validate();
}

double cross_rate(const CrossDemandModel& model, std::size_t product,
                  const std::vector<demand::MarketContext>& contexts) {
  const auto& params = model.own[product];
  double logit = demand::regressors(contexts[product]).dot(params.beta);
  for (std::size_t j = 0; j < contexts.size(); ++j) {
    if (j == product) continue;
    logit += model.cross(static_cast<Eigen::Index>(product), static_cast<Eigen::Index>(j)) * contexts[j].own_price;
  }
  return demand::logistic_rate(params.eta, params.delta, logit);
}

void MultiProductConfig::validate() const {
  require(!products.empty(), ErrorKind::Config, "multi-product: no products");
  require(demand.size() == products.size(), ErrorKind::Config,
          "multi-product: demand model and scenario counts differ");
  demand.validate();
  for (const auto& p : products) {
    p.validate();
    require(p.horizon == products.front().horizon && p.discount == products.front().discount, ErrorKind::Config,
            "multi-product: products must share horizon and discount");
  }
}

std::vector<MarketState> reset(const MultiProductConfig& config) {
  config.validate();
  std::vector<MarketState> states;
  for (const auto& p : config.products) states.push_back(reset(p));
  return states;
}

MultiStepOutcome multi_product_step(const MultiProductConfig& config, const std::vector<MarketState>& states,
                                    const std::vector<Action>& actions, Rng& rng) {
  const std::size_t n = config.size();
  require(states.size() == n && actions.size() == n && config.demand.size() == n, ErrorKind::Config,
          "multi_product_step: product count mismatch");
  std::vector<demand::MarketContext> contexts(n);
  for (std::size_t i = 0; i < n; ++i)
    contexts[i] = {actions[i].price, states[i].competitor_price, states[i].reference_price};
  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) rates[i] = cross_rate(config.demand, i, contexts);

  MultiStepOutcome out;
  out.outcomes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long d = demand::sample_demand(rates[i], rng);
    out.outcomes.push_back(step_with_demand(config.products[i], states[i], actions[i], d, rng));
    out.joint_reward += out.outcomes.back().reward;
  }
  return out;
}

}  // namespace pricestock::market
