#pragma once

#include <memory>
#include <string>
#include <vector>

#include "drfdm/data.hpp"
#include "drfdm/recouple.hpp"

namespace drfdm {

// --- stateless estimators ---------------------------------------------------

/// sigma_next = (1 - lambda) y y' + lambda sigma.
MatrixXd ewma_cov(const MatrixXd& previous, const Eigen::Ref<const VectorXd>& y, double lambda);

/// Linear shrinkage of the sample covariance (1/T normalization) toward the
/// constant-correlation target, with the estimated optimal intensity
/// clipped to [0, 1]. Rows of `window` are observations.
struct ShrinkageResult {
  MatrixXd cov;
  double intensity = 0.0;
};
ShrinkageResult lw_shrinkage(const MatrixXd& window);

/// B Sigma_f B' + diag(idio).
MatrixXd factor_model_cov(const MatrixXd& loadings, const MatrixXd& factor_cov,
                          const VectorXd& idio_var);

/// Exact factor model from per-asset OLS (with intercept) on the window:
/// B Sigma_f B' + diag(residual variances), Sigma_f the window sample
/// covariance of the factors.
MatrixXd efm_cov(const MatrixXd& returns_window, const MatrixXd& factor_window);

VectorXd ew_weights(int n);

/// Symmetrizes and adds ridge * trace / N to the diagonal.
MatrixXd regularize(const MatrixXd& cov, double ridge = 1e-8);

// --- Wishart DLM -------------------------------------------------------------

/// Exchangeable local-level DLM with discounted inverse-Wishart volatility.
///   prior:    R = c / delta, nu = kappa * n
///   forecast: y ~ T_nu(m, q S) with q = R + 1, covariance q S nu / (nu - 2)
///   update:   e = y - m, A = R / q, m += A e, c = R / q,
///             S = (nu S + e e' / q) / (nu + 1), n = nu + 1
struct WishartDLMState {
  VectorXd m;
  double c = 1.0;
  MatrixXd S;
  double n = 10.0;
  double delta = 0.997;
  double kappa = 0.99;
};

WishartDLMState wishart_init(int dim, double s0_diag = 0.1, double delta = 0.997,
                             double kappa = 0.99, double c0 = 1.0, double n0 = 10.0);

struct WishartForecast {
  VectorXd mean;
  MatrixXd cov;    // predictive covariance
  MatrixXd scale;  // Student-t scale matrix q S
  double dof = 0.0;
};

WishartForecast wishart_forecast(const WishartDLMState& state);

/// Multivariate Student-t log density of y under the forecast.
double wishart_log_density(const WishartForecast& fc, const Eigen::Ref<const VectorXd>& y);

struct WishartStep {
  WishartDLMState state;
  WishartForecast forecast;
};

WishartStep wishart_dlm_step(const WishartDLMState& state, const Eigen::Ref<const VectorXd>& y);

// --- sequential estimator interface -------------------------------------------

/// A benchmark that produces one-step-ahead mean/covariance forecasts and is
/// then shown the realized row. Implementations must only read rows < t when
/// forecasting row t.
class CovarianceEstimator {
 public:
  virtual ~CovarianceEstimator() = default;
  virtual std::string name() const = 0;
  /// Called once with the full panel before the first forecast; may use
  /// rows [0, panel.train_len) for warm-up.
  virtual void start(const ReturnPanel& panel) = 0;
  /// Predictive moments for row t given rows < t.
  virtual Moments forecast(const ReturnPanel& panel, int t) = 0;
  /// Incorporate row t after it is realized.
  virtual void observe(const ReturnPanel& panel, int t) = 0;
  /// True when the weights should ignore the covariance (equal weighting).
  virtual bool equal_weight() const { return false; }
};

struct BenchmarkOptions {
  int window = 208;  // rolling window for EFM / LW
  double ridge = 1e-8;
};

std::unique_ptr<CovarianceEstimator> make_ewma(double lambda);
std::unique_ptr<CovarianceEstimator> make_lw(const BenchmarkOptions& opts = {});
std::unique_ptr<CovarianceEstimator> make_efm(const BenchmarkOptions& opts = {});
std::unique_ptr<CovarianceEstimator> make_wdlm(double delta = 0.997, double kappa = 0.99,
                                               double s0_diag = 0.1);
std::unique_ptr<CovarianceEstimator> make_factor_wdlm(double delta = 0.997, double kappa = 0.99,
                                                      double s0_diag = 0.1);
std::unique_ptr<CovarianceEstimator> make_ew();

/// Factory by name: ewma97, ewma99, lw, efm, wdlm, fwdlm, ew.
std::unique_ptr<CovarianceEstimator> make_benchmark(const std::string& name,
                                                    const BenchmarkOptions& opts = {});

}  // namespace drfdm
