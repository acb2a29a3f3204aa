#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drfdm/dlm.hpp"

namespace drfdm {

/// Bit k set means parent k is in the regression.
using ParentMask = std::uint32_t;

inline int mask_size(ParentMask m) { return __builtin_popcount(m); }

/// One candidate univariate model: parent subset and discount pair.
struct ModelSpec {
  ParentMask parents = 0;
  double delta = 1.0;
  double kappa = 1.0;

  int dim() const { return 1 + mask_size(parents); }
  bool operator==(const ModelSpec&) const = default;
};

/// Candidate models of one equation, each with its own filter state, plus the
/// log posterior model probabilities and the forgetting factor.
struct EquationPool {
  std::vector<ModelSpec> specs;
  std::vector<NGState> states;
  std::vector<double> log_probs;
  double alpha = 0.99;

  std::size_t size() const { return specs.size(); }
  void validate() const;
};

struct PoolOptions {
  std::vector<double> delta_grid{0.998, 0.999, 1.0};
  std::vector<double> kappa_grid{0.99, 0.995, 1.0};
  double alpha = 0.99;
};

/// Asset equation: every non-empty subset of `n_factors` parents crossed with
/// the discount grids, ordered mask-major then delta then kappa.
EquationPool build_asset_pool(int n_factors, const PoolOptions& opts, double s0);

/// Factor equation at a position with `preceding` earlier factors: the full
/// preceding mask crossed with the discount grids.
EquationPool build_factor_pool(int preceding, const PoolOptions& opts, double s0);

double log_sum_exp(std::span<const double> x);

/// Forgetting step: alpha * log p, renormalized.
std::vector<double> predict_probs(std::span<const double> log_probs, double alpha);
inline std::vector<double> predict_probs(const EquationPool& pool) {
  return predict_probs(pool.log_probs, pool.alpha);
}

/// Bayes step: predicted + log density, renormalized in log space.
/// Throws NumericError naming the first NaN density.
std::vector<double> update_probs(std::span<const double> predicted,
                                 std::span<const double> log_densities);

/// Argmax with ties going to the lowest index.
std::size_t argmax(std::span<const double> x);
inline std::size_t select_best(const EquationPool& pool) { return argmax(pool.log_probs); }

/// Total probability of models whose parent mask contains `parent`.
double inclusion_probability(const EquationPool& pool, int parent);

/// Builds F = (1, parents in mask order) into `out`.
void gather_regressor(ParentMask mask, const Eigen::Ref<const VectorXd>& parents,
                      ScratchVector& out);

/// Scores every model at y, updates every state and then the probabilities
/// (forget, then Bayes). Returns the per-model log predictive densities.
std::vector<double> assimilate_pool(EquationPool& pool,
                                    const Eigen::Ref<const VectorXd>& parents, double y);

}  // namespace drfdm
