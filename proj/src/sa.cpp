// SPDX-License-Identifier: Apache-2.0
#include "pricestock/sa.hpp"

#include <algorithm>
#include <cmath>

#include "pricestock/csv.hpp"
#include "pricestock/error.hpp"
#include "pricestock/rng.hpp"

namespace pricestock::sa {

double StepSchedule::fast(long k) const {
  return fast_scale / std::pow(static_cast<double>(k) + offset, fast_exponent);
}

double StepSchedule::slow(long k) const {
  return slow_scale / std::pow(static_cast<double>(k) + offset, slow_exponent);
}

void StepSchedule::validate() const {
  require(fast_scale > 0.0 && slow_scale > 0.0, ErrorKind::Config, "step schedule: scales must be positive");
  require(offset >= 1.0, ErrorKind::Config, "step schedule: offset must be >= 1");
  require(0.5 < fast_exponent && fast_exponent < slow_exponent && slow_exponent <= 1.0, ErrorKind::Config,
          "step schedule: need 0.5 < fast exponent < slow exponent <= 1");
  if (slow_scale <= fast_scale) return;  // termwise beta_k < alpha_k
  // Otherwise compare the squared sums: partial sums plus integral tails.
  const long n = 1000000;
  double a2 = 0.0, b2 = 0.0;
  for (long k = 0; k < n; ++k) {
    a2 += fast(k) * fast(k);
    b2 += slow(k) * slow(k);
  }
  const double tail_base = static_cast<double>(n) + offset;
  a2 += fast_scale * fast_scale * std::pow(tail_base, 1.0 - 2.0 * fast_exponent) / (2.0 * fast_exponent - 1.0);
  b2 += slow_scale * slow_scale * std::pow(tail_base, 1.0 - 2.0 * slow_exponent) / (2.0 * slow_exponent - 1.0);
  require(b2 < a2, ErrorKind::Config, "step schedule: need sum beta^2 < sum alpha^2");
}

double estimate_grad_p(const analytic::SinglePeriodProblem& problem, double price, double stock, long demand) {
  const auto& k = problem.costs;
  const double lambda = problem.rate(price);
  require(lambda > 0.0, ErrorKind::Domain, "estimate_grad_p: demand rate must be positive");
  const double slope = problem.rate_slope();
  const double d = static_cast<double>(demand);
  const double score = (d / lambda - 1.0) * slope;  // d log P(d) / dp for Poisson
  const double sold = std::min(d, stock);
  const double left = std::max(stock - d, 0.0);
  return sold + price * score * sold - (k.holding + k.shortage) * score * left - k.shortage * slope;
}

double estimate_grad_x(const analytic::SinglePeriodProblem& problem, double price, double stock, long demand) {
  const auto& k = problem.costs;
  const double covered = static_cast<double>(demand) <= stock ? 1.0 : 0.0;
  return k.shortage - k.ordering + price - (k.holding + k.shortage + price) * covered;
}

SATrace run_two_timescale(const analytic::SinglePeriodProblem& problem, const SAConfig& config) {
  problem.validate();
  require(config.iterations >= 0, ErrorKind::Config, "SA: iterations must be >= 0");
  require(config.samples_per_step >= 1, ErrorKind::Config, "SA: samples per step must be >= 1");
  require(config.record_every >= 1, ErrorKind::Config, "SA: record_every must be >= 1");
  require(config.tail_fraction > 0.0 && config.tail_fraction <= 1.0, ErrorKind::Config,
          "SA: tail fraction must lie in (0, 1]");

  const auto& pd = problem.price_domain;
  const auto& xd = problem.stock_domain;
  Rng rng = make_stream(config.seed, "sa/demand");
  double p = std::clamp(config.initial_price, pd.lo, pd.hi);
  double x = std::clamp(config.initial_stock, xd.lo, xd.hi);

  SATrace trace;
  trace.iterations = config.iterations;
  trace.records.reserve(static_cast<std::size_t>(config.iterations / config.record_every + 1));
  const long tail_start =
      config.iterations - static_cast<long>(std::ceil(config.tail_fraction * static_cast<double>(config.iterations)));
  double sum_p = 0.0, sum_x = 0.0;
  long tail_count = 0;

  const double inv_n = 1.0 / config.samples_per_step;
  for (long k = 0; k < config.iterations; ++k) {
    double g = 0.0, h = 0.0;
    const double lambda = problem.rate(p);
    for (int s = 0; s < config.samples_per_step; ++s) {
      const long d = demand::sample_demand(lambda, rng);
      g += estimate_grad_p(problem, p, x, d);
      h += estimate_grad_x(problem, p, x, d);
    }
    g *= inv_n;
    h *= inv_n;
    if (k % config.record_every == 0) trace.records.push_back({k, p, x, g, h});

    const double step_p = config.fast == FastVariable::Price ? config.schedule.fast(k) : config.schedule.slow(k);
    const double step_x = config.fast == FastVariable::Price ? config.schedule.slow(k) : config.schedule.fast(k);
    p = std::clamp(p + step_p * g, pd.lo, pd.hi);
    x = std::clamp(x + step_x * h, xd.lo, xd.hi);
    if (k >= tail_start) {
      sum_p += p;
      sum_x += x;
      ++tail_count;
    }
  }
  trace.final_price = p;
  trace.final_stock = x;
  trace.averaged_price = tail_count ? sum_p / static_cast<double>(tail_count) : p;
  trace.averaged_stock = tail_count ? sum_x / static_cast<double>(tail_count) : x;
  return trace;
}

TrackingReport tracking_diagnostics(const analytic::SinglePeriodProblem& problem, std::span<const SATrace> traces,
                                    const StepSchedule& schedule, long sample_every) {
  require(!traces.empty() && !traces.front().records.empty(), ErrorKind::Contract,
          "tracking_diagnostics: empty trace");
  TrackingReport report;
  const auto& first = traces.front().records;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i].k % sample_every != 0) continue;
    double total = 0.0;
    std::size_t runs = 0;
    for (const auto& t : traces) {
      if (i >= t.records.size()) continue;
      const auto& r = t.records[i];
      total += std::abs(r.price - analytic::optimal_price_given_x(problem, r.stock));
      ++runs;
    }
    report.k.push_back(first[i].k);
    report.mean_abs_error.push_back(total / static_cast<double>(runs));
  }
  const std::size_t n = report.k.size();
  const std::size_t quarter = std::max<std::size_t>(1, n / 4);
  for (std::size_t i = 0; i < quarter; ++i) {
    report.first_quarter_mean += report.mean_abs_error[i] / static_cast<double>(quarter);
    report.final_quarter_mean += report.mean_abs_error[n - 1 - i] / static_cast<double>(quarter);
  }
  report.decays = report.final_quarter_mean < report.first_quarter_mean;

  // Least-squares slope of log error against log envelope.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const long k = report.k[i];
    const double envelope = schedule.slow(k) / schedule.fast(k) + std::sqrt(schedule.fast(k));
    const double e = report.mean_abs_error[i];
    if (!(e > 0.0)) continue;
    const double lx = std::log(envelope), ly = std::log(e);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m >= 2) {
    const double denom = static_cast<double>(m) * sxx - sx * sx;
    if (denom != 0.0) report.loglog_slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
  }
  return report;
}

void write_trace_csv(const std::string& path, const SATrace& trace) {
  CsvWriter csv(path, {"k", "p", "x", "g_hat", "h_hat"});
  for (const auto& r : trace.records) csv.row(r.k, r.price, r.stock, r.g_hat, r.h_hat);
}

}  // namespace pricestock::sa
