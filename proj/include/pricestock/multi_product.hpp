// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "pricestock/market.hpp"

namespace pricestock::market {

/// Logistic demand with cross-price terms: the logit of product i is its own
/// kappa' beta_i plus sum_{j != i} cross(i, j) * p_j.
struct CrossDemandModel {
  std::vector<demand::LogisticDemandParams> own;
  Eigen::MatrixXd cross;  // N x N, diagonal ignored

  void validate() const;
  std::size_t size() const { return own.size(); }
};

double cross_rate(const CrossDemandModel& model, std::size_t product,
                  const std::vector<demand::MarketContext>& contexts);

/// Per-product scenarios (costs, grids, competitor) sharing one horizon and
/// discount; each scenario's own `demand` field is ignored in favour of the
/// cross model.
struct MultiProductConfig {
  std::vector<ScenarioConfig> products;
  CrossDemandModel demand;

  void validate() const;
  std::size_t size() const { return products.size(); }
};

struct MultiStepOutcome {
  std::vector<StepOutcome> outcomes;
  double joint_reward = 0.0;  // sum of the per-product period rewards
};

std::vector<MarketState> reset(const MultiProductConfig& config);

MultiStepOutcome multi_product_step(const MultiProductConfig& config, const std::vector<MarketState>& states,
                                    const std::vector<Action>& actions, Rng& rng);

}  // namespace pricestock::market
