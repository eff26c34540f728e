// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pricestock/demand.hpp"
#include "pricestock/market.hpp"

namespace pricestock::analytic {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// One selling period, zero lead time, linearized Poisson demand. `x` is the
/// post-order stock level, so the order quantity is x - initial_stock.
struct SinglePeriodProblem {
  market::CostParams costs;  // lead time ignored
  int initial_stock = 0;
  demand::LinearizedDemandParams demand;
  Interval price_domain{0.0, 80.0};
  Interval stock_domain{0.0, 20.0};

  void validate() const;
  double rate(double price) const { return demand::lambda_linearized(demand, price); }
  double rate_slope() const { return demand::lambda_linearized_slope(demand); }

  /// eta=800, delta=0.5, a=-4, l=-0.01, h=4, b=10, c=5, x0=0, p in [0,80], x in [0,20].
  static SinglePeriodProblem appendix_c();
};

double poisson_pmf(double lambda, long k);
/// P(d <= k); zero for k < 0.
double poisson_cdf(double lambda, long k);

/// E[(x - d)^+] by the finite sum over k <= floor(x).
double expected_inventory(const SinglePeriodProblem& problem, double price, double stock);
/// E[min(d, x)] = (1 - CDF(floor x)) x + sum_{k <= floor x} k pmf(k).
double expected_sales(const SinglePeriodProblem& problem, double price, double stock);
double expected_revenue(const SinglePeriodProblem& problem, double price, double stock);
/// E[(d - x)^+] = E[(x - d)^+] + lambda - x.
double expected_lost(const SinglePeriodProblem& problem, double price, double stock);

/// p E[min(d,x)] - (h+b) E[(x-d)^+] - b lambda + b x - c (x - x0). Defined for
/// every x >= 0; below x0 the ordering term turns into a refund.
double profit(const SinglePeriodProblem& problem, double price, double stock);

/// Closed-form dF/dp.
double grad_p(const SinglePeriodProblem& problem, double price, double stock);
/// Right derivative dF/dx = b - c + p - (h+b+p) CDF(floor x).
double grad_x(const SinglePeriodProblem& problem, double price, double stock);

struct OptimalityReport {
  double g_value = 0.0;      // dF/dp
  double slope_below = 0.0;  // b - c + p - (h+b+p) CDF(x-1)
  double slope_above = 0.0;  // b - c + p - (h+b+p) CDF(x)
  bool satisfied = false;    // interior first-order conditions hold
  bool boundary = false;     // p or x sits on its domain boundary
  bool boundary_optimal = false;  // KKT sign conditions hold with the active bounds
  double newton_distance = 0.0;   // |g / F_pp|, distance in price units to the stationary point
};

OptimalityReport check_optimality(const SinglePeriodProblem& problem, double price, int stock,
                                  double tolerance = 1e-4);

/// argmax_p F(p, x) by bisection on dF/dp (F is concave in p); returns a domain
/// bound when dF/dp keeps one sign across the domain.
double optimal_price_given_x(const SinglePeriodProblem& problem, double stock);

struct GridOptimum {
  double price = 0.0;
  int stock = 0;
  double value = 0.0;
};

/// Exhaustive argmax over `prices` x integer stocks in [max(x0, x_lo), x_hi];
/// first maximum in (price, stock) order wins ties.
GridOptimum enumerate_optimum(const SinglePeriodProblem& problem, std::span<const double> prices);

struct ChordViolation {
  double price_a = 0.0;
  int stock_a = 0;
  double price_b = 0.0;
  int stock_b = 0;
  double midpoint_value = 0.0;
  double chord_value = 0.0;
};

/// Searches grid pairs (A, B) whose midpoint lies on the grid for
/// F(mid) < (F(A) + F(B)) / 2 - margin, i.e. a witness against joint concavity.
std::optional<ChordViolation> find_chord_violation(const SinglePeriodProblem& problem,
                                                   std::span<const double> prices, std::span<const int> stocks,
                                                   double margin = 1e-9);

/// `p,x,F` surface for plotting.
void write_surface_csv(const std::string& path, const SinglePeriodProblem& problem,
                       std::span<const double> prices, std::span<const int> stocks);

}  // namespace pricestock::analytic
