// SPDX-License-Identifier: Apache-2.0
#include "pricestock/demand_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "pricestock/csv.hpp"
#include "pricestock/demand.hpp"
#include "pricestock/error.hpp"

namespace pricestock::demand {

std::string_view to_string(FitKind kind) {
  switch (kind) {
    case FitKind::Linear: return "linear";
    case FitKind::Exponential: return "exponential";
    case FitKind::IsoElasticity: return "iso-elasticity";
    case FitKind::Logit: return "logit";
  }
  return "linear";
}

FitKind parse_fit_kind(std::string_view name) {
  if (name == "linear") return FitKind::Linear;
  if (name == "exponential") return FitKind::Exponential;
  if (name == "iso-elasticity" || name == "iso") return FitKind::IsoElasticity;
  if (name == "logit") return FitKind::Logit;
  fail(ErrorKind::Config, "unknown demand model kind '" + std::string(name) + "'");
}

namespace {

struct Line {
  double intercept;
  double slope;
};

Line ols(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd design(x.size(), 2);
  design.col(0).setOnes();
  design.col(1) = x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 2) fail(ErrorKind::Singular, "demand fit: degenerate design (all regressor values equal)");
  const Eigen::Vector2d beta = qr.solve(y);
  return {beta(0), beta(1)};
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted) {
  const double mean = y.mean();
  const double sst = (y.array() - mean).square().sum();
  if (sst == 0.0) return 0.0;
  const double sse = (y - fitted).squaredNorm();
  return 1.0 - sse / sst;
}

Eigen::VectorXd logit_curve(double size, double a, double b, const Eigen::VectorXd& p) {
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out(i) = size * stable_sigmoid(a + b * p(i));
  return out;
}

struct LogitParams {
  double size, a, b;
};

// Inner step for a fixed market size: OLS on empirical logits.
LogitParams logit_given_size(double size, const Eigen::VectorXd& p, const Eigen::VectorXd& d,
                             double correction) {
  Eigen::VectorXd z(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    z(i) = std::log((d(i) + correction) / (size - d(i) + correction));
  const Line line = ols(p, z);
  return {size, line.intercept, line.slope};
}

LogitParams fit_logit(const Eigen::VectorXd& p, const Eigen::VectorXd& d) {
  const double max_d = d.maxCoeff();
  require(max_d > 0.0, ErrorKind::Domain, "logit fit: all demands are zero");
  const double correction = d.minCoeff() > 0.0 ? 0.0 : 0.5;
  auto sse = [&](const LogitParams& q) { return (d - logit_curve(q.size, q.a, q.b, p)).squaredNorm(); };
  auto objective = [&](double log_size) { return sse(logit_given_size(std::exp(log_size), p, d, correction)); };

  // Golden-section over log market size.
  double lo = std::log(max_d * (1.0 + 1e-6) + 1e-9);
  double hi = std::log(max_d * 1e3 + 1.0);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = objective(x2);
    }
  }
  LogitParams best = logit_given_size(std::exp(0.5 * (lo + hi)), p, d, correction);

  // Levenberg-Marquardt on the raw-scale squared error.
  double current = sse(best);
  double damping = 1e-3;
  for (int it = 0; it < 500 && current > 0.0; ++it) {
    Eigen::MatrixXd jac(p.size(), 3);
    Eigen::VectorXd resid(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double s = stable_sigmoid(best.a + best.b * p(i));
      resid(i) = d(i) - best.size * s;
      jac(i, 0) = s;
      jac(i, 1) = best.size * s * (1.0 - s);
      jac(i, 2) = best.size * s * (1.0 - s) * p(i);
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Eigen::Vector3d jtr = jac.transpose() * resid;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d lhs = jtj;
      lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = lhs.ldlt().solve(jtr);
      const LogitParams trial{best.size + step(0), best.a + step(1), best.b + step(2)};
      if (trial.size > 0.0 && std::isfinite(trial.a) && std::isfinite(trial.b)) {
        const double value = sse(trial);
        if (value < current) {
          const double gain = current - value;
          best = trial;
          current = value;
          damping = std::max(damping / 3.0, 1e-15);
          improved = true;
          if (gain <= 1e-15 * (1.0 + value)) it = 500;
          break;
        }
      }
      damping *= 4.0;
    }
    if (!improved) break;
  }
  return best;
}

}  // namespace

FitResult fit_demand_model(FitKind kind, std::span<const PriceDemand> data) {
  require(data.size() >= 3, ErrorKind::Config, "demand fit: need at least 3 data points");
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd p(n), d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p(i) = data[static_cast<std::size_t>(i)].price;
    d(i) = data[static_cast<std::size_t>(i)].demand;
  }
  require(p.allFinite() && d.allFinite(), ErrorKind::Domain, "demand fit: non-finite data");

  FitResult result;
  result.kind = kind;
  result.n = data.size();
  switch (kind) {
    case FitKind::Linear: {
      const Line line = ols(p, d);
      result.coefficients = {line.intercept, line.slope};
      result.r_squared = r_squared(d, (line.intercept + line.slope * p.array()).matrix());
      break;
    }
    case FitKind::Exponential:
    case FitKind::IsoElasticity: {
      require(d.minCoeff() > 0.0, ErrorKind::Domain, "demand fit: log transform needs strictly positive demand");
      Eigen::VectorXd x = p;
      if (kind == FitKind::IsoElasticity) {
        require(p.minCoeff() > 0.0, ErrorKind::Domain, "demand fit: iso-elasticity needs strictly positive prices");
        x = p.array().log();
      }
      const Eigen::VectorXd y = d.array().log();
      const Line line = ols(x, y);
      result.coefficients = {line.intercept, line.slope};
      result.r_squared = r_squared(y, (line.intercept + line.slope * x.array()).matrix());
      break;
    }
    case FitKind::Logit: {
      require(d.minCoeff() >= 0.0, ErrorKind::Domain, "demand fit: logit needs non-negative demand");
      if ((p.array() == p(0)).all()) fail(ErrorKind::Singular, "demand fit: degenerate design (all prices equal)");
      const LogitParams q = fit_logit(p, d);
      result.coefficients = {q.size, q.a, q.b};
      result.r_squared = r_squared(d, logit_curve(q.size, q.a, q.b, p));
      break;
    }
  }
  return result;
}

double predict(const FitResult& fit, double price) {
  const auto& c = fit.coefficients;
  switch (fit.kind) {
    case FitKind::Linear: return c[0] + c[1] * price;
    case FitKind::Exponential: return std::exp(c[0] + c[1] * price);
    case FitKind::IsoElasticity: return std::exp(c[0] + c[1] * std::log(price));
    case FitKind::Logit: return c[0] * stable_sigmoid(c[1] + c[2] * price);
  }
  return 0.0;
}

std::vector<PriceDemand> read_price_demand_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  std::size_t price_col = table.header.size(), demand_col = table.header.size();
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == "price") price_col = i;
    if (table.header[i] == "demand") demand_col = i;
  }
  if (price_col == table.header.size() || demand_col == table.header.size())
    fail(ErrorKind::Parse, path + ":1: header must contain 'price' and 'demand'");
  if (table.rows.empty()) fail(ErrorKind::Parse, path + ":2: no data rows");
  std::vector<PriceDemand> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::size_t line = table.line_numbers[r];
    out.push_back({parse_number(table.rows[r][price_col], line), parse_number(table.rows[r][demand_col], line)});
  }
  return out;
}

}  // namespace pricestock::demand
