// SPDX-License-Identifier: Apache-2.0
#include "pricestock/analytic.hpp"

#include <algorithm>
#include <cmath>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"

namespace pricestock::analytic {

void SinglePeriodProblem::validate() const {
  costs.validate();
  require(price_domain.lo < price_domain.hi, ErrorKind::Config, "price domain must be a non-empty interval");
  require(stock_domain.lo >= 0.0 && stock_domain.lo < stock_domain.hi, ErrorKind::Config,
          "stock domain must be a non-empty interval in [0, inf)");
  require(initial_stock >= 0, ErrorKind::Config, "initial stock must be non-negative");
  demand.validate(price_domain.lo, price_domain.hi);
}

SinglePeriodProblem SinglePeriodProblem::appendix_c() {
  SinglePeriodProblem p;
  p.costs.holding = 4.0;
  p.costs.shortage = 10.0;
  p.costs.ordering = 5.0;
  p.initial_stock = 0;
  p.demand = {800.0, 0.5, -4.0, -0.01};
  p.price_domain = {0.0, 80.0};
  p.stock_domain = {0.0, 20.0};
  return p;
}

double poisson_pmf(double lambda, long k) {
  if (k < 0) return 0.0;
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kk = static_cast<double>(k);
  return std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
}

double poisson_cdf(double lambda, long k) {
  double sum = 0.0;
  for (long i = 0; i <= k; ++i) sum += poisson_pmf(lambda, i);
  return std::min(sum, 1.0);
}

namespace {
long floor_stock(double stock) { return static_cast<long>(std::floor(stock)); }
}  // namespace

double expected_inventory(const SinglePeriodProblem& problem, double price, double stock) {
  const double lambda = problem.rate(price);
  double sum = 0.0;
  for (long k = 0; k <= floor_stock(stock); ++k) sum += poisson_pmf(lambda, k) * (stock - static_cast<double>(k));
  return sum;
}

double expected_sales(const SinglePeriodProblem& problem, double price, double stock) {
  const double lambda = problem.rate(price);
  double cdf = 0.0, partial_mean = 0.0;
  for (long k = 0; k <= floor_stock(stock); ++k) {
    const double pmf = poisson_pmf(lambda, k);
    cdf += pmf;
    partial_mean += static_cast<double>(k) * pmf;
  }
  return (1.0 - cdf) * stock + partial_mean;
}

double expected_revenue(const SinglePeriodProblem& problem, double price, double stock) {
  return price * expected_sales(problem, price, stock);
}

double expected_lost(const SinglePeriodProblem& problem, double price, double stock) {
  return expected_inventory(problem, price, stock) + problem.rate(price) - stock;
}

double profit(const SinglePeriodProblem& problem, double price, double stock) {
  const auto& k = problem.costs;
  const double inventory = expected_inventory(problem, price, stock);
  return price * (stock - inventory) - (k.holding + k.shortage) * inventory - k.shortage * problem.rate(price) +
         k.shortage * stock - k.ordering * (stock - problem.initial_stock);
}

double grad_p(const SinglePeriodProblem& problem, double price, double stock) {
  const auto& k = problem.costs;
  const double lambda = problem.rate(price);
  const double slope = problem.rate_slope();
  double inventory = 0.0, d_inventory = 0.0;
  for (long i = 0; i <= floor_stock(stock); ++i) {
    const double pmf = poisson_pmf(lambda, i);
    const double gap = stock - static_cast<double>(i);
    inventory += pmf * gap;
    // d pmf / d lambda = pmf (k - lambda) / lambda
    d_inventory += pmf * (static_cast<double>(i) - lambda) / lambda * gap;
  }
  d_inventory *= slope;
  return (stock - inventory) - price * d_inventory - (k.holding + k.shortage) * d_inventory - k.shortage * slope;
}

namespace {
double stock_slope(const SinglePeriodProblem& problem, double price, long floor_x) {
  const auto& k = problem.costs;
  return k.shortage - k.ordering + price -
         (k.holding + k.shortage + price) * poisson_cdf(problem.rate(price), floor_x);
}
}  // namespace

double grad_x(const SinglePeriodProblem& problem, double price, double stock) {
  return stock_slope(problem, price, floor_stock(stock));
}

OptimalityReport check_optimality(const SinglePeriodProblem& problem, double price, int stock, double tolerance) {
  OptimalityReport r;
  r.g_value = grad_p(problem, price, stock);
  r.slope_below = stock_slope(problem, price, stock - 1);
  r.slope_above = stock_slope(problem, price, stock);
  r.satisfied = std::abs(r.g_value) <= tolerance && r.slope_below >= 0.0 && r.slope_above < 0.0;

  const double span = problem.price_domain.hi - problem.price_domain.lo;
  const double eps = 1e-9 * std::max(1.0, span);
  const bool at_p_lo = price <= problem.price_domain.lo + eps;
  const bool at_p_hi = price >= problem.price_domain.hi - eps;
  const bool at_x_lo = stock <= problem.stock_domain.lo;
  const bool at_x_hi = stock >= problem.stock_domain.hi;
  r.boundary = at_p_lo || at_p_hi || at_x_lo || at_x_hi;

  const bool price_ok = at_p_hi ? r.g_value >= -tolerance
                        : at_p_lo ? r.g_value <= tolerance
                                  : std::abs(r.g_value) <= tolerance;
  const bool below_ok = at_x_lo || r.slope_below >= 0.0;
  const bool above_ok = at_x_hi || r.slope_above < 0.0;
  r.boundary_optimal = r.boundary && price_ok && below_ok && above_ok;

  const double h = 1e-4 * std::max(1.0, span);
  const double curvature = (grad_p(problem, std::min(price + h, problem.price_domain.hi), stock) -
                            grad_p(problem, std::max(price - h, problem.price_domain.lo), stock)) /
                           (std::min(price + h, problem.price_domain.hi) - std::max(price - h, problem.price_domain.lo));
  r.newton_distance = curvature != 0.0 ? std::abs(r.g_value / curvature) : std::abs(r.g_value) * 1e300;
  return r;
}

double optimal_price_given_x(const SinglePeriodProblem& problem, double stock) {
  double lo = problem.price_domain.lo;
  double hi = problem.price_domain.hi;
  if (grad_p(problem, hi, stock) >= 0.0) return hi;
  if (grad_p(problem, lo, stock) <= 0.0) return lo;
  // F is concave in p, so its slope changes sign once; bisect on the analytic
  // slope (a golden-section search on F stalls at sqrt(eps) on the flat top).
  for (int i = 0; i < 200 && hi - lo > 0.0; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (grad_p(problem, mid, stock) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GridOptimum enumerate_optimum(const SinglePeriodProblem& problem, std::span<const double> prices) {
  require(!prices.empty(), ErrorKind::Config, "enumerate_optimum: empty price grid");
  const int x_lo = std::max(problem.initial_stock, static_cast<int>(std::ceil(problem.stock_domain.lo)));
  const int x_hi = static_cast<int>(std::floor(problem.stock_domain.hi));
  require(x_lo <= x_hi, ErrorKind::Config, "enumerate_optimum: no feasible stock level");
  GridOptimum best{prices.front(), x_lo, profit(problem, prices.front(), x_lo)};
  for (double p : prices) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double v = profit(problem, p, x);
      if (v > best.value) best = {p, x, v};
    }
  }
  return best;
}

std::optional<ChordViolation> find_chord_violation(const SinglePeriodProblem& problem,
                                                   std::span<const double> prices, std::span<const int> stocks,
                                                   double margin) {
  const std::size_t np = prices.size(), nx = stocks.size();
  std::vector<double> values(np * nx);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < nx; ++j) values[i * nx + j] = profit(problem, prices[i], stocks[j]);

  std::optional<ChordViolation> worst;
  double worst_gap = margin;
  // Midpoints of index pairs with even index sums land back on the grid
  // (exactly so for evenly spaced grids).
  for (std::size_t ia = 0; ia < np; ++ia)
    for (std::size_t ja = 0; ja < nx; ++ja)
      for (std::size_t ib = ia; ib < np; ib += 1)
        for (std::size_t jb = 0; jb < nx; ++jb) {
          if ((ia + ib) % 2 || (ja + jb) % 2) continue;
          if (ib == ia && jb <= ja) continue;
          const std::size_t im = (ia + ib) / 2, jm = (ja + jb) / 2;
          const double chord = 0.5 * (values[ia * nx + ja] + values[ib * nx + jb]);
          const double mid = values[im * nx + jm];
          if (chord - mid > worst_gap) {
            worst_gap = chord - mid;
            worst = ChordViolation{prices[ia], stocks[ja], prices[ib], stocks[jb], mid, chord};
          }
        }
  return worst;
}

void write_surface_csv(const std::string& path, const SinglePeriodProblem& problem,
                       std::span<const double> prices, std::span<const int> stocks) {
  CsvWriter csv(path, {"p", "x", "F"});
  for (double p : prices)
    for (int x : stocks) csv.row(p, x, profit(problem, p, x));
}

}  // namespace pricestock::analytic
