#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "drfdm/qp.hpp"

namespace drfdm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct WeightVector {
  std::string date;
  VectorXd w;
};

/// Closed-form mean-variance weights hitting the per-period target `tau`.
/// Throws DegeneracyError when `mean` is (numerically) collinear with 1.
VectorXd mvp_weights(const VectorXd& mean, const MatrixXd& cov, double tau);

/// Global minimum-variance weights, cov^{-1} 1 / (1' cov^{-1} 1).
VectorXd gmv_weights(const MatrixXd& cov);

/// Box-constrained |w_i| <= bound variant of MVP (mean and tau given) or GMV.
VectorXd constrained_weights(const std::optional<VectorXd>& mean, const MatrixXd& cov,
                             std::optional<double> tau, double bound);

struct CostResult {
  VectorXd net;
  VectorXd turnover;
};

/// Turnover against the previous weights drifted by the previous period's
/// returns, and net = gross - tc_bps / 1e4 * turnover. Row t of `weights`
/// is held over period t and earns row t of `returns`. The first period
/// has zero turnover unless `charge_entry` is set.
CostResult apply_costs(const VectorXd& gross, const MatrixXd& weights, const MatrixXd& returns,
                       double tc_bps, bool charge_entry = false);

struct Performance {
  double mean = 0.0;  // annualized
  double sd = 0.0;    // annualized, sample sd
  double sr = 0.0;
};

/// Throws NumericError when the series has zero variance.
Performance performance(const VectorXd& net, int periods_per_year = 52);

/// Per-period fee phi equating average quadratic utility of the candidate
/// (after paying phi) with the benchmark. Smaller-|phi| root.
double management_fee_per_period(const VectorXd& candidate, const VectorXd& benchmark,
                                 double gamma);

/// Annualized fee in basis points: periods_per_year * phi * 1e4.
double management_fee(const VectorXd& candidate, const VectorXd& benchmark, double gamma,
                      int periods_per_year = 52);

/// Percentage of (t, j) cells where the forecast sign matches the realized
/// sign. Zero counts as negative.
double hit_rate(const MatrixXd& forecasts, const MatrixXd& realized);

/// Mean of rows [t-52, t-5] of `returns`: the signal available when
/// forecasting row t. Throws WindowError for t < 52.
VectorXd momentum_signal(const MatrixXd& returns, int t);

}  // namespace drfdm
