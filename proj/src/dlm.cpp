#include "drfdm/dlm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

void check_discount(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0))
    throw ParameterError(std::string("discount ") + name + " must lie in (0, 1], got " +
                         std::to_string(v));
}

void check_regressor(Eigen::Index dim, Eigen::Index got) {
  if (dim != got)
    throw ShapeError("regressor has dimension " + std::to_string(got) + ", state has " +
                     std::to_string(dim));
}

double t_log_density(double e, double q, double dof) {
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * q) -
         0.5 * (dof + 1.0) * std::log1p(e * e / (dof * q));
}

}  // namespace

void NGState::validate() const {
  if (C.rows() != m.size() || C.cols() != m.size())
    throw ShapeError("NGState: C must be d x d with d = dim(m)");
  if (!(n > 0.0) || !(s > 0.0)) throw NumericError("NGState: n and s must be positive");
  if ((C - C.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, C.cwiseAbs().maxCoeff()))
    throw NumericError("NGState: C is not symmetric");
  if (Eigen::LLT<MatrixXd>(C).info() != Eigen::Success)
    throw NumericError("NGState: C is not positive definite");
}

NGState init_state(int dim, double s0) {
  if (dim < 1) throw ParameterError("init_state: dimension must be >= 1");
  if (!(s0 > 0.0) || !std::isfinite(s0))
    throw ParameterError("init_state: s0 must be positive, got " + std::to_string(s0));
  NGState st;
  st.m = VectorXd::Zero(dim);
  st.C = 100.0 * MatrixXd::Identity(dim, dim);
  st.n = 10.0;
  st.s = s0;
  return st;
}

PriorState evolve(const NGState& state, double delta, double kappa) {
  check_discount(delta, "delta");
  check_discount(kappa, "kappa");
  PriorState p;
  p.a = state.m;
  p.R = state.C / delta;
  p.r = kappa * state.n;
  p.s_prev = state.s;
  return p;
}

TForecast forecast(const PriorState& prior, const Eigen::Ref<const VectorXd>& regressor) {
  check_regressor(prior.a.size(), regressor.size());
  return {regressor.dot(prior.a), prior.s_prev + regressor.dot(prior.R * regressor), prior.r};
}

double log_predictive_density(const TForecast& fc, double y) {
  return t_log_density(y - fc.f, fc.q, fc.dof);
}

void repair_scale_matrix(MatrixXd& C) {
  C = 0.5 * (C + C.transpose()).eval();
  if (Eigen::LLT<MatrixXd>(C).info() == Eigen::Success) return;
  const double jitter = 1e-12 * C.trace() / static_cast<double>(C.rows());
  C.diagonal().array() += std::abs(jitter);
  if (Eigen::LLT<MatrixXd>(C).info() != Eigen::Success)
    throw NumericError("posterior scale matrix lost positive definiteness");
}

NGState update(const PriorState& prior, const Eigen::Ref<const VectorXd>& regressor, double y) {
  const auto fc = forecast(prior, regressor);
  const double e = y - fc.f;
  const VectorXd rf = prior.R * regressor;
  const VectorXd gain = rf / fc.q;
  const double z = (prior.r + e * e / fc.q) / (prior.r + 1.0);
  NGState post;
  post.m = prior.a + gain * e;
  post.C = (prior.R - gain * gain.transpose() * fc.q) * z;
  post.n = prior.r + 1.0;
  post.s = prior.s_prev * z;
  repair_scale_matrix(post.C);
  return post;
}

double score(const NGState& state, double delta, double kappa,
             const Eigen::Ref<const VectorXd>& regressor, double y) {
  check_regressor(state.m.size(), regressor.size());
  const double f = regressor.dot(state.m);
  const double q = state.s + regressor.dot(state.C * regressor) / delta;
  return t_log_density(y - f, q, kappa * state.n);
}

double assimilate(NGState& state, double delta, double kappa,
                  const Eigen::Ref<const VectorXd>& regressor, double y) {
  check_regressor(state.m.size(), regressor.size());
  if (state.m.size() > kMaxStateDim)
    throw ShapeError("assimilate: state dimension exceeds kMaxStateDim");
  ScratchVector rf = state.C * regressor / delta;  // R F
  const double f = regressor.dot(state.m);
  const double q = state.s + regressor.dot(rf);
  const double r = kappa * state.n;
  const double e = y - f;
  const double lpd = t_log_density(e, q, r);

  const double z = (r + e * e / q) / (r + 1.0);
  state.m.noalias() += rf * (e / q);
  // C = (R - A A' q) z with A = RF / q, so A A' q = g g' for g = RF / sqrt(q).
  const ScratchVector g = rf / std::sqrt(q);
  state.C /= delta;
  state.C.noalias() -= g * g.transpose();
  state.C *= z;
  state.n = r + 1.0;
  state.s *= z;

  // Cheap PD screen; the full repair only runs when it fails.
  const auto d = state.C.rows();
  bool ok = true;
  for (Eigen::Index i = 0; i < d && ok; ++i) ok = state.C(i, i) > 0.0;
  if (ok && d > 1) ok = Eigen::LLT<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                                 kMaxStateDim, kMaxStateDim>>(state.C)
                                .info() == Eigen::Success;
  if (!ok) repair_scale_matrix(state.C);
  return lpd;
}

double ols_residual_variance(const Eigen::Ref<const MatrixXd>& x,
                             const Eigen::Ref<const VectorXd>& y) {
  const auto t = y.size();
  if (x.rows() != t) throw ShapeError("ols_residual_variance: row mismatch");
  if (t < 2) throw ParameterError("ols_residual_variance: need at least 2 observations");
  const double mean = y.mean();
  const double sample_var = (y.array() - mean).square().sum() / static_cast<double>(t - 1);
  const auto p = x.cols() + 1;
  double out = sample_var;
  if (t > p) {
    MatrixXd design(t, p);
    design.col(0).setOnes();
    design.rightCols(x.cols()) = x;
    Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
    if (qr.rank() == p) {
      const VectorXd resid = y - design * qr.solve(y);
      out = resid.squaredNorm() / static_cast<double>(t - p);
    }
  }
  return std::max(out, 1e-12);
}

}  // namespace drfdm
