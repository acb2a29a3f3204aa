#pragma once

#include <Eigen/Dense>

namespace drfdm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Largest regression dimension (intercept + parents) the fused kernels
/// handle with stack scratch space.
inline constexpr int kMaxStateDim = 16;

using ScratchVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDim, 1>;

/// Normal-Gamma posterior of one univariate dynamic regression.
/// `m` is the coefficient mean (intercept first), `C` its scale matrix,
/// `n` the degrees of freedom and `s` the residual variance estimate.
struct NGState {
  VectorXd m;
  MatrixXd C;
  double n = 0.0;
  double s = 0.0;

  int dim() const { return static_cast<int>(m.size()); }
  /// Throws NumericError if the state is not a valid posterior.
  void validate() const;
};

/// One-step prior after discounting.
struct PriorState {
  VectorXd a;
  MatrixXd R;
  double r = 0.0;
  double s_prev = 0.0;

  int dim() const { return static_cast<int>(a.size()); }
};

/// Location-scale Student-t forecast: y ~ t_dof(f, q).
struct TForecast {
  double f = 0.0;
  double q = 0.0;
  double dof = 0.0;
};

/// Default initial state: m = 0, C = 100 I, n = 10, s = s0.
NGState init_state(int dim, double s0);

/// Discount evolution: a = m, R = C / delta, r = kappa n.
PriorState evolve(const NGState& state, double delta, double kappa);

TForecast forecast(const PriorState& prior, const Eigen::Ref<const VectorXd>& regressor);

/// Log density of the location-scale Student-t at y.
double log_predictive_density(const TForecast& fc, double y);

/// Conjugate update of the prior with observation y.
NGState update(const PriorState& prior, const Eigen::Ref<const VectorXd>& regressor, double y);

/// Evolve, score and update in place, returning the log predictive density
/// of y. Same arithmetic as evolve/forecast/update without allocating.
double assimilate(NGState& state, double delta, double kappa,
                  const Eigen::Ref<const VectorXd>& regressor, double y);

/// Log predictive density of y under the discounted prior of `state`,
/// without modifying it.
double score(const NGState& state, double delta, double kappa,
             const Eigen::Ref<const VectorXd>& regressor, double y);

/// Symmetrize C and, if Cholesky fails, add 1e-12 * trace(C) / d to the
/// diagonal. Throws NumericError when the matrix is still not PD.
void repair_scale_matrix(MatrixXd& C);

/// Residual variance (divisor T - p) of an OLS fit of y on [1, X].
/// Falls back to the plain sample variance of y when the fit is rank
/// deficient or has no residual degrees of freedom.
double ols_residual_variance(const Eigen::Ref<const MatrixXd>& x,
                             const Eigen::Ref<const VectorXd>& y);

}  // namespace drfdm
