#pragma once

#include <span>
#include <vector>

#include "drfdm/ordering.hpp"

namespace drfdm {

/// Selected model of one equation at the current date: its parent mask and
/// its discounted prior.
struct EquationSelection {
  ParentMask parents = 0;
  PriorState prior;
};

/// Joint one-step-ahead predictive moments.
struct PredictiveMoments {
  VectorXd lambda;   // K factor means
  MatrixXd sigma_f;  // K x K
  VectorXd f;        // N asset means
  MatrixXd sigma_r;  // N x N
  MatrixXd loadings; // N x K predicted loadings, zero where not selected
  VectorXd alpha;    // N predicted intercepts
  VectorXd idio;     // N idiosyncratic predictive variances
};

struct MomentOptions {
  /// 0 means strict: dof <= 2 throws MomentError. A positive floor (2.05 in
  /// backtests) clamps the dof instead and counts the clamp.
  double dof_floor = 0.0;
};

/// Mean and variance of one equation's predictive distribution given the
/// first two moments of its parents (zero-padded to the full parent vector).
struct ConditionalMoments {
  double mean = 0.0;
  double idio = 0.0;     // r/(r-2) (s + u)
  VectorXd beta;         // predicted loadings over the full parent vector
  bool dof_clamped = false;
};

ConditionalMoments conditional_moments(const EquationSelection& sel,
                                       const Eigen::Ref<const VectorXd>& parent_mean,
                                       const Eigen::Ref<const MatrixXd>& parent_cov,
                                       const MomentOptions& opts = {}, int equation = -1);

/// Recursive factor moments for one ordering. `priors[p]` is the selected
/// prior of the equation at position p (dimension p + 1). Result is in
/// canonical factor coordinates.
Moments factor_moments(std::span<const PriorState> priors, const Permutation& perm,
                       const MomentOptions& opts = {}, int* clamped = nullptr);

/// Asset means and covariance from factor moments and each asset's selected
/// model (masks over canonical factors).
PredictiveMoments asset_moments(const Moments& factors, std::span<const EquationSelection> assets,
                                const MomentOptions& opts = {}, int* clamped = nullptr);

struct LpdResult {
  double total = 0.0;
  std::vector<double> per_equation;
};

/// Sum of per-asset Student-t log densities of the realized returns, each
/// conditional on the realized factor values of its parents.
LpdResult joint_lpd(std::span<const EquationSelection> assets,
                    const Eigen::Ref<const VectorXd>& realized_factors,
                    const Eigen::Ref<const VectorXd>& realized_returns);

}  // namespace drfdm
