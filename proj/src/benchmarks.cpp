#include "drfdm/benchmarks.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "drfdm/dlm.hpp"
#include "drfdm/error.hpp"
#include "drfdm/portfolio.hpp"

namespace drfdm {

MatrixXd ewma_cov(const MatrixXd& previous, const Eigen::Ref<const VectorXd>& y, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw ParameterError("ewma_cov: decay must lie in (0, 1), got " + std::to_string(lambda));
  if (previous.rows() != y.size() || previous.cols() != y.size())
    throw ShapeError("ewma_cov: dimension mismatch");
  MatrixXd out = lambda * previous;
  out.noalias() += (1.0 - lambda) * y * y.transpose();
  return out;
}

ShrinkageResult lw_shrinkage(const MatrixXd& window) {
  const auto t = window.rows();
  const auto n = window.cols();
  if (t <= 2) throw ParameterError("lw_shrinkage: window needs more than 2 observations");
  const double tt = static_cast<double>(t);
  const MatrixXd x = window.rowwise() - window.colwise().mean();
  const MatrixXd sample = x.transpose() * x / tt;
  const VectorXd var = sample.diagonal();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(var(i) > 0.0))
      throw NumericError("lw_shrinkage: asset " + std::to_string(i) + " has zero variance");
  const VectorXd sd = var.cwiseSqrt();

  double rbar = 0.0;
  if (n > 1) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) acc += sample(i, j) / (sd(i) * sd(j));
    rbar = acc / static_cast<double>(n * (n - 1));
  }
  MatrixXd prior = rbar * sd * sd.transpose();
  prior.diagonal() = var;

  // Asymptotic variance terms of the sample covariance.
  const MatrixXd y = x.array().square().matrix();
  const MatrixXd phi_mat =
      (y.transpose() * y / tt).array() - 2.0 * ((x.transpose() * x).array() * sample.array()) / tt +
      sample.array().square();
  const double phi = phi_mat.sum();

  const MatrixXd term1 = x.array().cube().matrix().transpose() * x / tt;
  const MatrixXd help = x.transpose() * x / tt;
  MatrixXd theta(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      theta(i, j) = term1(i, j) - help(i, i) * sample(i, j) - help(i, j) * var(i) +
                    var(i) * sample(i, j);
  theta.diagonal().setZero();
  double rho = phi_mat.diagonal().sum();
  double cross = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cross += sd(j) / sd(i) * theta(i, j);
  rho += rbar * cross;

  const double gamma = (sample - prior).squaredNorm();
  double intensity = 0.0;
  if (gamma > 0.0) intensity = std::clamp((phi - rho) / gamma / tt, 0.0, 1.0);
  ShrinkageResult out;
  out.intensity = intensity;
  out.cov = intensity * prior + (1.0 - intensity) * sample;
  out.cov.diagonal() = var;
  return out;
}

MatrixXd factor_model_cov(const MatrixXd& loadings, const MatrixXd& factor_cov,
                          const VectorXd& idio_var) {
  if (loadings.cols() != factor_cov.rows() || loadings.rows() != idio_var.size())
    throw ShapeError("factor_model_cov: dimension mismatch");
  MatrixXd out = loadings * factor_cov * loadings.transpose();
  out = 0.5 * (out + out.transpose()).eval();
  out.diagonal() += idio_var;
  return out;
}

MatrixXd efm_cov(const MatrixXd& returns_window, const MatrixXd& factor_window) {
  const auto w = returns_window.rows();
  const auto k = factor_window.cols();
  if (factor_window.rows() != w) throw ShapeError("efm_cov: window lengths differ");
  if (w < k + 2) throw ParameterError("efm_cov: window needs at least K + 2 observations");
  MatrixXd design(w, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = factor_window;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(design);
  if (qr.rank() < k + 1) throw NumericError("efm_cov: factor window is rank deficient");
  const MatrixXd coef = qr.solve(returns_window);  // (K+1) x N
  const MatrixXd resid = returns_window - design * coef;
  const VectorXd idio =
      resid.colwise().squaredNorm().transpose() / static_cast<double>(w - k - 1);
  const MatrixXd centered = factor_window.rowwise() - factor_window.colwise().mean();
  const MatrixXd fcov = centered.transpose() * centered / static_cast<double>(w - 1);
  return factor_model_cov(coef.bottomRows(k).transpose(), fcov, idio);
}

VectorXd ew_weights(int n) {
  if (n < 1) throw ParameterError("ew_weights: N must be >= 1");
  return VectorXd::Constant(n, 1.0 / n);
}

MatrixXd regularize(const MatrixXd& cov, double ridge) {
  MatrixXd out = 0.5 * (cov + cov.transpose());
  const double scale = out.trace() / static_cast<double>(std::max<Eigen::Index>(1, out.rows()));
  out.diagonal().array() += ridge * (scale > 0.0 ? scale : 1.0);
  return out;
}

WishartDLMState wishart_init(int dim, double s0_diag, double delta, double kappa, double c0,
                             double n0) {
  if (dim < 1) throw ParameterError("wishart_init: dimension must be >= 1");
  if (!(delta > 0.0 && delta <= 1.0) || !(kappa > 0.0 && kappa <= 1.0))
    throw ParameterError("wishart_init: discounts must lie in (0, 1]");
  if (!(s0_diag > 0.0) || !(c0 > 0.0) || !(n0 > 0.0))
    throw ParameterError("wishart_init: S0, c0 and n0 must be positive");
  WishartDLMState s;
  s.m = VectorXd::Zero(dim);
  s.c = c0;
  s.S = s0_diag * MatrixXd::Identity(dim, dim);
  s.n = n0;
  s.delta = delta;
  s.kappa = kappa;
  return s;
}

WishartForecast wishart_forecast(const WishartDLMState& state) {
  const double prior_scale = state.c / state.delta;
  const double q = prior_scale + 1.0;
  const double nu = state.kappa * state.n;
  WishartForecast fc;
  fc.mean = state.m;
  fc.scale = q * state.S;
  fc.dof = nu;
  fc.cov = nu > 2.0 ? MatrixXd(fc.scale * (nu / (nu - 2.0))) : fc.scale;
  return fc;
}

double wishart_log_density(const WishartForecast& fc, const Eigen::Ref<const VectorXd>& y) {
  const auto p = static_cast<double>(y.size());
  Eigen::LLT<MatrixXd> llt(fc.scale);
  if (llt.info() != Eigen::Success) throw NumericError("wishart_log_density: scale not PD");
  const VectorXd e = y - fc.mean;
  const double maha = llt.matrixL().solve(e).squaredNorm();
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double nu = fc.dof;
  return std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu) -
         0.5 * p * std::log(nu * std::numbers::pi) - 0.5 * logdet -
         0.5 * (nu + p) * std::log1p(maha / nu);
}

WishartStep wishart_dlm_step(const WishartDLMState& state, const Eigen::Ref<const VectorXd>& y) {
  if (y.size() != state.m.size()) throw ShapeError("wishart_dlm_step: dimension mismatch");
  WishartStep out;
  out.forecast = wishart_forecast(state);
  const double prior_scale = state.c / state.delta;
  const double q = prior_scale + 1.0;
  const double gain = prior_scale / q;
  const double nu = state.kappa * state.n;
  const VectorXd e = y - state.m;
  auto& s = out.state;
  s = state;
  s.m = state.m + gain * e;
  s.c = prior_scale / q;
  s.S = (nu * state.S + e * e.transpose() / q) / (nu + 1.0);
  s.n = nu + 1.0;
  s.S = 0.5 * (s.S + s.S.transpose()).eval();
  if (Eigen::LLT<MatrixXd>(s.S).info() != Eigen::Success) repair_scale_matrix(s.S);
  return out;
}

namespace {

MatrixXd training_cov(const ReturnPanel& panel) {
  const auto t = std::max(2, panel.train_len);
  const MatrixXd x = panel.returns.topRows(t);
  const MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(t - 1);
}

class Ewma final : public CovarianceEstimator {
 public:
  explicit Ewma(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw ParameterError("EWMA decay must lie in (0, 1)");
  }
  std::string name() const override {
    return "EWMA(" + std::to_string(lambda_).substr(0, 4) + ")";
  }
  void start(const ReturnPanel& panel) override { cov_ = training_cov(panel); }
  Moments forecast(const ReturnPanel& panel, int t) override {
    return {momentum_signal(panel.returns, t), cov_};
  }
  void observe(const ReturnPanel& panel, int t) override {
    cov_ = ewma_cov(cov_, panel.returns.row(t).transpose(), lambda_);
  }

 private:
  double lambda_;
  MatrixXd cov_;
};

class RollingEstimator : public CovarianceEstimator {
 public:
  explicit RollingEstimator(BenchmarkOptions opts) : opts_(opts) {}
  void start(const ReturnPanel&) override {}
  void observe(const ReturnPanel&, int) override {}

 protected:
  std::pair<int, int> window(int t) const {
    const int w = std::min(opts_.window, t);
    return {t - w, w};
  }
  BenchmarkOptions opts_;
};

class LedoitWolf final : public RollingEstimator {
 public:
  using RollingEstimator::RollingEstimator;
  std::string name() const override { return "LW"; }
  Moments forecast(const ReturnPanel& panel, int t) override {
    const auto [begin, w] = window(t);
    return {momentum_signal(panel.returns, t),
            lw_shrinkage(panel.returns.middleRows(begin, w)).cov};
  }
};

class ExactFactorModel final : public RollingEstimator {
 public:
  using RollingEstimator::RollingEstimator;
  std::string name() const override { return "EFM"; }
  Moments forecast(const ReturnPanel& panel, int t) override {
    const auto [begin, w] = window(t);
    return {momentum_signal(panel.returns, t),
            efm_cov(panel.returns.middleRows(begin, w), panel.factors.middleRows(begin, w))};
  }
};

class WishartBenchmark final : public CovarianceEstimator {
 public:
  WishartBenchmark(double delta, double kappa, double s0)
      : delta_(delta), kappa_(kappa), s0_(s0) {}
  std::string name() const override { return "W-DLM"; }
  void start(const ReturnPanel& panel) override {
    state_ = wishart_init(panel.n_assets(), s0_, delta_, kappa_);
  }
  Moments forecast(const ReturnPanel&, int) override {
    const auto fc = wishart_forecast(state_);
    return {fc.mean, fc.cov};
  }
  void observe(const ReturnPanel& panel, int t) override {
    state_ = wishart_dlm_step(state_, panel.returns.row(t).transpose()).state;
  }

 private:
  double delta_, kappa_, s0_;
  WishartDLMState state_;
};

class FactorWishartBenchmark final : public CovarianceEstimator {
 public:
  FactorWishartBenchmark(double delta, double kappa, double s0)
      : delta_(delta), kappa_(kappa), s0_(s0) {}
  std::string name() const override { return "Factor-W-DLM"; }
  void start(const ReturnPanel& panel) override {
    const int k = panel.n_factors();
    if (k < 1) throw ParameterError("Factor-W-DLM needs at least one factor");
    factors_ = wishart_init(k, s0_, delta_, kappa_);
    assets_.clear();
    const int train = std::max(2, panel.train_len);
    for (int i = 0; i < panel.n_assets(); ++i) {
      const double s0 = ols_residual_variance(panel.factors.topRows(train),
                                              panel.returns.col(i).head(train));
      assets_.push_back(init_state(k + 1, s0));
    }
  }
  Moments forecast(const ReturnPanel& panel, int) override {
    const auto fc = wishart_forecast(factors_);
    const int k = panel.n_factors();
    std::vector<EquationSelection> sel;
    sel.reserve(assets_.size());
    for (const auto& st : assets_)
      sel.push_back({static_cast<ParentMask>((ParentMask{1} << k) - 1), evolve(st, delta_, kappa_)});
    const auto pm = asset_moments({fc.mean, fc.cov}, sel, {2.05});
    return {pm.f, pm.sigma_r};
  }
  void observe(const ReturnPanel& panel, int t) override {
    const VectorXd f = panel.factors.row(t).transpose();
    factors_ = wishart_dlm_step(factors_, f).state;
    VectorXd regressor(f.size() + 1);
    regressor << 1.0, f;
    for (std::size_t i = 0; i < assets_.size(); ++i)
      assimilate(assets_[i], delta_, kappa_, regressor, panel.returns(t, static_cast<Eigen::Index>(i)));
  }

 private:
  double delta_, kappa_, s0_;
  WishartDLMState factors_;
  std::vector<NGState> assets_;
};

class EqualWeight final : public CovarianceEstimator {
 public:
  std::string name() const override { return "EW"; }
  void start(const ReturnPanel&) override {}
  Moments forecast(const ReturnPanel& panel, int) override {
    const int n = panel.n_assets();
    return {VectorXd::Zero(n), MatrixXd::Identity(n, n)};
  }
  void observe(const ReturnPanel&, int) override {}
  bool equal_weight() const override { return true; }
};

}  // namespace

std::unique_ptr<CovarianceEstimator> make_ewma(double lambda) {
  return std::make_unique<Ewma>(lambda);
}
std::unique_ptr<CovarianceEstimator> make_lw(const BenchmarkOptions& opts) {
  return std::make_unique<LedoitWolf>(opts);
}
std::unique_ptr<CovarianceEstimator> make_efm(const BenchmarkOptions& opts) {
  return std::make_unique<ExactFactorModel>(opts);
}
std::unique_ptr<CovarianceEstimator> make_wdlm(double delta, double kappa, double s0_diag) {
  return std::make_unique<WishartBenchmark>(delta, kappa, s0_diag);
}
std::unique_ptr<CovarianceEstimator> make_factor_wdlm(double delta, double kappa, double s0_diag) {
  return std::make_unique<FactorWishartBenchmark>(delta, kappa, s0_diag);
}
std::unique_ptr<CovarianceEstimator> make_ew() { return std::make_unique<EqualWeight>(); }

std::unique_ptr<CovarianceEstimator> make_benchmark(const std::string& name,
                                                    const BenchmarkOptions& opts) {
  if (name == "ewma97") return make_ewma(0.97);
  if (name == "ewma99") return make_ewma(0.99);
  if (name == "lw") return make_lw(opts);
  if (name == "efm") return make_efm(opts);
  if (name == "wdlm") return make_wdlm();
  if (name == "fwdlm") return make_factor_wdlm();
  if (name == "ew") return make_ew();
  throw ParameterError("unknown benchmark '" + name +
                       "' (expected ewma97, ewma99, lw, efm, wdlm, fwdlm or ew)");
}

}  // namespace drfdm
