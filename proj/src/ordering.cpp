#include "drfdm/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

std::vector<Permutation> enumerate_orderings(int n_factors, int cap) {
  if (n_factors < 1) throw ParameterError("enumerate_orderings: need at least one factor");
  if (n_factors > cap)
    throw CapacityError("ordering learning over " + std::to_string(n_factors) +
                        " factors exceeds the cap of " + std::to_string(cap) +
                        "; use a fixed ordering (ordering = fixed)");
  Permutation p(static_cast<std::size_t>(n_factors));
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::vector<double> update_ordering_probs(std::span<const double> log_probs,
                                          std::span<const double> log_densities,
                                          double alpha_ord) {
  if (!(alpha_ord > 0.0 && alpha_ord <= 1.0))
    throw ParameterError("ordering forgetting factor must lie in (0, 1]");
  for (std::size_t i = 0; i < log_densities.size(); ++i)
    if (std::isnan(log_densities[i]))
      throw NumericError("NaN joint factor density for ordering " + std::to_string(i));
  return update_probs(predict_probs(log_probs, alpha_ord), log_densities);
}

void update_ordering_probs(std::vector<OrderingState>& states,
                           std::span<const double> log_densities, double alpha_ord) {
  std::vector<double> lp(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) lp[i] = states[i].log_prob;
  const auto out = update_ordering_probs(lp, log_densities, alpha_ord);
  for (std::size_t i = 0; i < states.size(); ++i) states[i].log_prob = out[i];
}

Moments mixture_factor_moments(std::span<const double> log_probs,
                               std::span<const Moments> components) {
  if (components.empty() || log_probs.size() != components.size())
    throw ShapeError("mixture_factor_moments: need one probability per component");
  const auto k = components.front().mean.size();
  Moments out{VectorXd::Zero(k), MatrixXd::Zero(k, k)};
  for (std::size_t i = 0; i < components.size(); ++i) {
    const double p = std::exp(log_probs[i]);
    const auto& c = components[i];
    out.mean.noalias() += p * c.mean;
    out.cov.noalias() += p * (c.cov + c.mean * c.mean.transpose());
  }
  out.cov.noalias() -= out.mean * out.mean.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Moments to_canonical(const Moments& by_position, const Permutation& perm) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  Moments out{VectorXd(k), MatrixXd(k, k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    out.mean(perm[static_cast<std::size_t>(i)]) = by_position.mean(i);
    for (Eigen::Index j = 0; j < k; ++j)
      out.cov(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) =
          by_position.cov(i, j);
  }
  return out;
}

VectorXd to_positions(const Eigen::Ref<const VectorXd>& canonical, const Permutation& perm) {
  VectorXd out(static_cast<Eigen::Index>(perm.size()));
  for (std::size_t i = 0; i < perm.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = canonical(perm[i]);
  return out;
}

}  // namespace drfdm
