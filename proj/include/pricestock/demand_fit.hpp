// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pricestock::demand {

enum class FitKind { Linear, Exponential, IsoElasticity, Logit };

std::string_view to_string(FitKind kind);
FitKind parse_fit_kind(std::string_view name);

struct PriceDemand {
  double price = 0.0;
  double demand = 0.0;
};

/// Fitted stationary demand curve.
///
/// Coefficient layout by kind:
///   Linear:        d = c0 + c1 p
///   Exponential:   ln d = c0 + c1 p
///   IsoElasticity: ln d = c0 + c1 ln p
///   Logit:         d = c0 * sigmoid(c1 + c2 p)   (c0 is the market size)
///
/// `r_squared` is measured on the scale the model is estimated on: the
/// log-transformed response for Exponential and IsoElasticity, the raw
/// demand otherwise. A response with zero variance reports r_squared = 0.
struct FitResult {
  FitKind kind = FitKind::Linear;
  std::vector<double> coefficients;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// OLS for the three linearizable kinds, NLS (golden-section over the
/// market size with inner OLS, then Levenberg-Marquardt polish) for Logit.
/// Throws Error(Singular) when all prices coincide, Error(Domain) for
/// non-positive demands or prices under a log transform, Error(Config) for
/// fewer than three points.
FitResult fit_demand_model(FitKind kind, std::span<const PriceDemand> data);

double predict(const FitResult& fit, double price);

/// Reads `price,demand` rows (header required).
std::vector<PriceDemand> read_price_demand_csv(const std::string& path);

}  // namespace pricestock::demand
