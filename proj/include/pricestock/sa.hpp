// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pricestock/analytic.hpp"

namespace pricestock::sa {

/// alpha_k = fast_scale / (k + offset)^fast_exponent, and likewise beta_k.
struct StepSchedule {
  double fast_scale = 2.0;
  double fast_exponent = 0.6;
  double slow_scale = 1.0;
  double slow_exponent = 0.9;
  double offset = 10.0;

  double fast(long k) const;
  double slow(long k) const;

  /// Checks sum alpha = sum beta = inf, sum beta^2 < sum alpha^2 < inf and
  /// beta/alpha -> 0, i.e. 0.5 < u < v <= 1 plus the squared-sum ordering.
  void validate() const;
};

enum class FastVariable { Price, Stock };

struct SAConfig {
  StepSchedule schedule;
  FastVariable fast = FastVariable::Price;
  double initial_price = 40.0;
  double initial_stock = 10.0;
  long iterations = 200000;
  int samples_per_step = 1;
  std::uint64_t seed = 0;
  int record_every = 1;        // keep every n-th iterate in the trace
  double tail_fraction = 0.5;  // share of final iterates averaged into the limit
};

struct SARecord {
  long k = 0;
  double price = 0.0;
  double stock = 0.0;
  double g_hat = 0.0;
  double h_hat = 0.0;
};

struct SATrace {
  std::vector<SARecord> records;
  long iterations = 0;
  double final_price = 0.0;
  double final_stock = 0.0;
  double averaged_price = 0.0;  // Polyak-Ruppert mean over the tail
  double averaged_stock = 0.0;
};

/// Likelihood-ratio estimate of dF/dp from one demand draw.
double estimate_grad_p(const analytic::SinglePeriodProblem& problem, double price, double stock, long demand);
/// Estimate of dF/dx from one demand draw.
double estimate_grad_x(const analytic::SinglePeriodProblem& problem, double price, double stock, long demand);

/// Projected coupled iteration; one demand draw (per sample) feeds both
/// estimators. Deterministic for a fixed seed.
SATrace run_two_timescale(const analytic::SinglePeriodProblem& problem, const SAConfig& config);

struct TrackingReport {
  std::vector<long> k;
  std::vector<double> mean_abs_error;  // mean over runs of |p_k - p*(x_k)|
  double first_quarter_mean = 0.0;
  double final_quarter_mean = 0.0;
  bool decays = false;
  double loglog_slope = 0.0;  // informational: fit against beta/alpha + sqrt(alpha)
};

/// Tracking error p_k - p*(x_k) at every `sample_every`-th recorded iterate.
TrackingReport tracking_diagnostics(const analytic::SinglePeriodProblem& problem, std::span<const SATrace> traces,
                                    const StepSchedule& schedule, long sample_every = 100);

void write_trace_csv(const std::string& path, const SATrace& trace);

}  // namespace pricestock::sa
