#pragma once

#include <span>
#include <vector>

#include "drfdm/selection.hpp"

namespace drfdm {

using Permutation = std::vector<int>;

/// Predictive mean and covariance of a random vector.
struct Moments {
  VectorXd mean;
  MatrixXd cov;
};

/// One ordering of the factor block. `perm[p]` is the canonical factor sitting
/// at position p; the equation at position p regresses on positions 0..p-1.
struct OrderingState {
  Permutation perm;
  std::vector<EquationPool> factor_pools;
  double log_prob = 0.0;
};

inline constexpr int kDefaultOrderingCap = 6;

/// All K! permutations of 0..K-1 in lexicographic order.
/// Throws CapacityError above `cap`; use a fixed ordering instead.
std::vector<Permutation> enumerate_orderings(int n_factors, int cap = kDefaultOrderingCap);

/// Forget-then-Bayes update of ordering log probabilities.
std::vector<double> update_ordering_probs(std::span<const double> log_probs,
                                          std::span<const double> log_densities,
                                          double alpha_ord);

/// In-place variant over ordering states.
void update_ordering_probs(std::vector<OrderingState>& states,
                           std::span<const double> log_densities, double alpha_ord);

/// Law of total mean/variance over components with probabilities exp(log_probs).
/// Components must already be in canonical factor coordinates.
Moments mixture_factor_moments(std::span<const double> log_probs,
                               std::span<const Moments> components);

/// Reorders position-indexed moments into canonical factor coordinates.
Moments to_canonical(const Moments& by_position, const Permutation& perm);

/// Inverse of `to_canonical`: picks factor values in position order.
VectorXd to_positions(const Eigen::Ref<const VectorXd>& canonical, const Permutation& perm);

}  // namespace drfdm
