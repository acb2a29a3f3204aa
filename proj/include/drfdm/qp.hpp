#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace drfdm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min 1/2 w' S w  s.t.  1'w = 1,  [mean'w = target],  -bound <= w_i <= bound.
struct BoxQp {
  MatrixXd cov;
  std::optional<VectorXd> mean;
  std::optional<double> target;
  double bound = 1.0;
};

/// KKT data at the optimum:
///   cov * w = budget_multiplier * 1 + target_multiplier * mean + bound_multipliers
/// with bound_multipliers(i) <= 0 on an active upper bound, >= 0 on an active
/// lower bound and 0 otherwise.
struct BoxQpSolution {
  VectorXd w;
  double budget_multiplier = 0.0;
  double target_multiplier = 0.0;
  VectorXd bound_multipliers;
  /// Active bounds: +(i+1) for w_i = bound, -(i+1) for w_i = -bound.
  std::vector<int> active;
  int iterations = 0;
};

/// Dual active-set (Goldfarb-Idnani) solve. Adds the most violated bound
/// first, lowest index on ties. Throws InfeasibleError listing the binding
/// set when no feasible point exists, NumericError when cov is not PD.
BoxQpSolution solve_box_qp(const BoxQp& problem);

}  // namespace drfdm
