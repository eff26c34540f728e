// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pricestock/rng.hpp"

namespace pricestock::demand {

/// Prices seen by a customer in one period.
struct MarketContext {
  double own_price = 0.0;
  double competitor_price = 0.0;
  double reference_price = 0.0;
};

/// The six sales regressors, in order: intercept, price rank, price gap
/// (o - p), competitor count, average price level, reference-price effect.
using Regressors = Eigen::Matrix<double, 6, 1>;

Regressors regressors(const MarketContext& ctx);

/// 1 / (1 + e^{-z}) evaluated without overflow for any finite z.
double stable_sigmoid(double z);

struct LogisticDemandParams {
  double eta = 1.0;    // market scale
  double delta = 0.5;  // time span of one period, (0, 1]
  Regressors beta = Regressors::Zero();

  void validate() const;
};

/// Poisson rate eta * delta * sigmoid(kappa' beta).
double demand_rate_logistic(const LogisticDemandParams& params, const MarketContext& ctx);

/// Same rate for an already-assembled logit value (single-regressor form).
double logistic_rate(double eta, double delta, double logit);

/// First-order expansion of the logistic rate: eta * delta * e^a * (1 + l p).
struct LinearizedDemandParams {
  double eta = 800.0;
  double delta = 0.5;
  double a = -4.0;
  double l = -0.01;

  /// Requires l < 0 and 1 + l p > 0 on [p_lo, p_hi].
  void validate(double p_lo, double p_hi) const;
  double scale() const;
};

double lambda_linearized(const LinearizedDemandParams& params, double price);
/// d lambda / d p, constant for the linearized model.
double lambda_linearized_slope(const LinearizedDemandParams& params);

/// Table-driven rate as a function of own price; linear interpolation between
/// knots, flat extrapolation outside them.
struct EmpiricalDemandTable {
  std::vector<double> prices;  // strictly increasing
  std::vector<double> rates;   // non-negative

  void validate() const;
};

double empirical_rate(const EmpiricalDemandTable& table, double price);

using DemandModel = std::variant<LogisticDemandParams, LinearizedDemandParams, EmpiricalDemandTable>;

double rate(const DemandModel& model, const MarketContext& ctx);
std::string model_name(const DemandModel& model);

/// Poisson draw with the given mean. Inverse-CDF over `uniform01`, so the
/// result is bit-identical across platforms for a given generator state.
long sample_demand(double rate, Rng& rng);

enum class CompetitorKind { UndercutCycle, UniformRandom, Fixed };

struct CompetitorStrategy {
  CompetitorKind kind = CompetitorKind::UndercutCycle;
  double decrement = 1.0;
  double p_min = 0.0;
  double p_max = 1.0;

  void validate() const;
};

double competitor_next_price(const CompetitorStrategy& strategy, double our_price,
                             double current, Rng& rng);

/// Exponential smoothing of the average market price.
double update_reference_price(double reference, double own_price, double competitor_price,
                              double smoothing);

}  // namespace pricestock::demand
