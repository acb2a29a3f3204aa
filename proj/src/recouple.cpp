#include "drfdm/recouple.hpp"

#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

std::vector<Eigen::Index> mask_indices(ParentMask mask, Eigen::Index width) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < width; ++k)
    if (mask & (ParentMask{1} << k)) idx.push_back(k);
  return idx;
}

}  // namespace

ConditionalMoments conditional_moments(const EquationSelection& sel,
                                       const Eigen::Ref<const VectorXd>& parent_mean,
                                       const Eigen::Ref<const MatrixXd>& parent_cov,
                                       const MomentOptions& opts, int equation) {
  const auto& pr = sel.prior;
  const auto width = parent_mean.size();
  const auto idx = mask_indices(sel.parents, width);
  const auto p = static_cast<Eigen::Index>(idx.size());
  if (pr.dim() != p + 1 || mask_size(sel.parents) != p)
    throw ShapeError("conditional_moments: prior dimension does not match parent mask");

  ConditionalMoments out;
  double dof = pr.r;
  if (!(dof > 2.0) || (opts.dof_floor > 0.0 && dof < opts.dof_floor)) {
    if (opts.dof_floor <= 0.0)
      throw MomentError("equation " + std::to_string(equation) + ": predictive dof " +
                        std::to_string(dof) + " <= 2, variance undefined");
    dof = opts.dof_floor;
    out.dof_clamped = true;
  }

  VectorXd lam(p);
  MatrixXd sig(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    lam(i) = parent_mean(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < p; ++j)
      sig(i, j) = parent_cov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  const double a_alpha = pr.a(0);
  const auto a_beta = pr.a.tail(p);
  const double r_alpha = pr.R(0, 0);
  const auto r_alpha_beta = pr.R.row(0).tail(p);
  const auto r_beta = pr.R.bottomRightCorner(p, p);

  const double u = lam.dot(r_beta * lam) + (r_beta * sig).trace() +
                   2.0 * r_alpha_beta.dot(lam) + r_alpha;
  out.mean = a_alpha + lam.dot(a_beta);
  out.idio = dof / (dof - 2.0) * (pr.s_prev + u);
  out.beta = VectorXd::Zero(width);
  for (Eigen::Index i = 0; i < p; ++i) out.beta(idx[static_cast<std::size_t>(i)]) = a_beta(i);
  return out;
}

Moments factor_moments(std::span<const PriorState> priors, const Permutation& perm,
                       const MomentOptions& opts, int* clamped) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  if (static_cast<Eigen::Index>(priors.size()) != k)
    throw ShapeError("factor_moments: need one prior per factor position");
  Moments pos{VectorXd::Zero(k), MatrixXd::Zero(k, k)};
  for (Eigen::Index j = 0; j < k; ++j) {
    const EquationSelection sel{static_cast<ParentMask>((ParentMask{1} << j) - 1),
                                priors[static_cast<std::size_t>(j)]};
    const auto cm = conditional_moments(sel, pos.mean.head(j), pos.cov.topLeftCorner(j, j), opts,
                                        perm[static_cast<std::size_t>(j)]);
    if (cm.dof_clamped && clamped) ++*clamped;
    const VectorXd cross = pos.cov.topLeftCorner(j, j) * cm.beta;
    pos.mean(j) = cm.mean;
    pos.cov(j, j) = cm.idio + cm.beta.dot(cross);
    pos.cov.block(0, j, j, 1) = cross;
    pos.cov.block(j, 0, 1, j) = cross.transpose();
  }
  return to_canonical(pos, perm);
}

PredictiveMoments asset_moments(const Moments& factors, std::span<const EquationSelection> assets,
                                const MomentOptions& opts, int* clamped) {
  const auto k = factors.mean.size();
  const auto n = static_cast<Eigen::Index>(assets.size());
  PredictiveMoments out;
  out.lambda = factors.mean;
  out.sigma_f = factors.cov;
  out.loadings = MatrixXd::Zero(n, k);
  out.alpha = VectorXd(n);
  out.idio = VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto cm = conditional_moments(assets[static_cast<std::size_t>(i)], factors.mean,
                                        factors.cov, opts, static_cast<int>(i));
    if (cm.dof_clamped && clamped) ++*clamped;
    out.loadings.row(i) = cm.beta.transpose();
    out.alpha(i) = assets[static_cast<std::size_t>(i)].prior.a(0);
    out.idio(i) = cm.idio;
  }
  out.f = out.alpha + out.loadings * factors.mean;
  const MatrixXd bs = out.loadings * factors.cov;
  out.sigma_r.noalias() = bs * out.loadings.transpose();
  out.sigma_r = 0.5 * (out.sigma_r + out.sigma_r.transpose()).eval();
  out.sigma_r.diagonal() += out.idio;
  return out;
}

LpdResult joint_lpd(std::span<const EquationSelection> assets,
                    const Eigen::Ref<const VectorXd>& realized_factors,
                    const Eigen::Ref<const VectorXd>& realized_returns) {
  if (static_cast<Eigen::Index>(assets.size()) != realized_returns.size())
    throw ShapeError("joint_lpd: one realized return per asset equation required");
  LpdResult out;
  out.per_equation.resize(assets.size());
  ScratchVector regressor;
  for (std::size_t i = 0; i < assets.size(); ++i) {
    gather_regressor(assets[i].parents, realized_factors, regressor);
    const auto fc = forecast(assets[i].prior, regressor);
    out.per_equation[i] = log_predictive_density(fc, realized_returns(static_cast<Eigen::Index>(i)));
    out.total += out.per_equation[i];
  }
  return out;
}

}  // namespace drfdm
