#include "drfdm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

void check_grids(const PoolOptions& opts) {
  if (opts.delta_grid.empty() || opts.kappa_grid.empty())
    throw ParameterError("discount grids must be non-empty");
  for (double d : opts.delta_grid)
    if (!(d > 0.0 && d <= 1.0)) throw ParameterError("delta grid value outside (0, 1]");
  for (double k : opts.kappa_grid)
    if (!(k > 0.0 && k <= 1.0)) throw ParameterError("kappa grid value outside (0, 1]");
  if (!(opts.alpha > 0.0 && opts.alpha <= 1.0))
    throw ParameterError("forgetting factor alpha must lie in (0, 1]");
}

EquationPool make_pool(const std::vector<ParentMask>& masks, const PoolOptions& opts,
                       double s0) {
  EquationPool pool;
  pool.alpha = opts.alpha;
  for (ParentMask m : masks)
    for (double d : opts.delta_grid)
      for (double k : opts.kappa_grid) {
        pool.specs.push_back({m, d, k});
        pool.states.push_back(init_state(1 + mask_size(m), s0));
      }
  const double uniform = -std::log(static_cast<double>(pool.specs.size()));
  pool.log_probs.assign(pool.specs.size(), uniform);
  return pool;
}

}  // namespace

void EquationPool::validate() const {
  if (specs.empty() || specs.size() != states.size() || specs.size() != log_probs.size())
    throw ShapeError("EquationPool: specs/states/log_probs must be non-empty and equal length");
  if (std::abs(log_sum_exp(log_probs)) > 1e-10)
    throw NumericError("EquationPool: model probabilities are not normalized");
}

EquationPool build_asset_pool(int n_factors, const PoolOptions& opts, double s0) {
  if (n_factors < 1) throw ParameterError("asset equations need at least one factor");
  if (n_factors > 20) throw CapacityError("asset model space too large (K > 20)");
  if (n_factors + 1 > kMaxStateDim) throw CapacityError("too many factors for the state kernel");
  check_grids(opts);
  std::vector<ParentMask> masks;
  for (ParentMask m = 1; m < (ParentMask{1} << n_factors); ++m) masks.push_back(m);
  return make_pool(masks, opts, s0);
}

EquationPool build_factor_pool(int preceding, const PoolOptions& opts, double s0) {
  if (preceding < 0) throw ParameterError("preceding factor count must be >= 0");
  if (preceding + 1 > kMaxStateDim) throw CapacityError("too many factors for the state kernel");
  check_grids(opts);
  return make_pool({static_cast<ParentMask>((ParentMask{1} << preceding) - 1)}, opts, s0);
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

std::vector<double> predict_probs(std::span<const double> log_probs, double alpha) {
  std::vector<double> out(log_probs.begin(), log_probs.end());
  if (alpha == 1.0) return out;
  for (double& v : out) v *= alpha;
  const double norm = log_sum_exp(out);
  for (double& v : out) v -= norm;
  return out;
}

std::vector<double> update_probs(std::span<const double> predicted,
                                 std::span<const double> log_densities) {
  if (predicted.size() != log_densities.size())
    throw ShapeError("update_probs: length mismatch");
  std::vector<double> out(predicted.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::isnan(log_densities[i]))
      throw NumericError("update_probs: NaN predictive density for model " + std::to_string(i));
    out[i] = predicted[i] + log_densities[i];
  }
  const double norm = log_sum_exp(out);
  if (!std::isfinite(norm))
    throw NumericError("update_probs: all models have zero predictive density");
  for (double& v : out) v -= norm;
  return out;
}

std::size_t argmax(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

double inclusion_probability(const EquationPool& pool, int parent) {
  if (parent < 0 || parent >= 32)
    throw ParameterError("inclusion_probability: factor index out of range");
  const ParentMask bit = ParentMask{1} << parent;
  bool any_mask_has_room = false;
  double total = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    any_mask_has_room = any_mask_has_room || (pool.specs[i].parents >= bit);
    if (pool.specs[i].parents & bit) total += std::exp(pool.log_probs[i]);
  }
  if (!any_mask_has_room)
    throw ParameterError("inclusion_probability: factor " + std::to_string(parent) +
                         " is not a candidate parent of this equation");
  return std::clamp(total, 0.0, 1.0);
}

void gather_regressor(ParentMask mask, const Eigen::Ref<const VectorXd>& parents,
                      ScratchVector& out) {
  out.resize(1 + mask_size(mask));
  out(0) = 1.0;
  Eigen::Index j = 1;
  for (Eigen::Index k = 0; k < parents.size(); ++k)
    if (mask & (ParentMask{1} << k)) out(j++) = parents(k);
  if (j != out.size()) throw ShapeError("parent mask refers to a missing parent value");
}

std::vector<double> assimilate_pool(EquationPool& pool,
                                    const Eigen::Ref<const VectorXd>& parents, double y) {
  std::vector<double> lpd(pool.size());
  ScratchVector regressor;
  ParentMask cached = ~ParentMask{0};
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& spec = pool.specs[i];
    if (spec.parents != cached) {
      gather_regressor(spec.parents, parents, regressor);
      cached = spec.parents;
    }
    lpd[i] = assimilate(pool.states[i], spec.delta, spec.kappa, regressor, y);
  }
  pool.log_probs = update_probs(predict_probs(pool.log_probs, pool.alpha), lpd);
  return lpd;
}

}  // namespace drfdm
