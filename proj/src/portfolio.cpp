#include "drfdm/portfolio.hpp"

#include <cmath>
#include <string>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

Eigen::LLT<MatrixXd> factor(const MatrixXd& cov, const char* who) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    throw ShapeError(std::string(who) + ": covariance must be square and non-empty");
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string(who) + ": covariance is not positive definite");
  return llt;
}

}  // namespace

VectorXd mvp_weights(const VectorXd& mean, const MatrixXd& cov, double tau) {
  const auto llt = factor(cov, "mvp_weights");
  if (mean.size() != cov.rows()) throw ShapeError("mvp_weights: mean dimension mismatch");
  const auto n = cov.rows();
  const VectorXd inv_one = llt.solve(VectorXd::Ones(n));
  const VectorXd inv_mean = llt.solve(mean);
  const double a = inv_one.sum();
  const double b = inv_mean.sum();
  const double c = mean.dot(inv_mean);
  const double det = a * c - b * b;
  if (!(det > 1e-12 * a * c))
    throw DegeneracyError("mvp_weights: expected returns are collinear with the budget vector "
                          "(AC - B^2 = " + std::to_string(det) + "); use GMV instead");
  return ((c - tau * b) / det) * inv_one + ((tau * a - b) / det) * inv_mean;
}

VectorXd gmv_weights(const MatrixXd& cov) {
  const auto llt = factor(cov, "gmv_weights");
  const VectorXd x = llt.solve(VectorXd::Ones(cov.rows()));
  return x / x.sum();
}

VectorXd constrained_weights(const std::optional<VectorXd>& mean, const MatrixXd& cov,
                             std::optional<double> tau, double bound) {
  BoxQp pb;
  pb.cov = cov;
  pb.mean = mean;
  pb.target = tau;
  pb.bound = bound;
  return solve_box_qp(pb).w;
}

CostResult apply_costs(const VectorXd& gross, const MatrixXd& weights, const MatrixXd& returns,
                       double tc_bps, bool charge_entry) {
  const auto t = gross.size();
  if (weights.rows() != t || returns.rows() != t || weights.cols() != returns.cols())
    throw ShapeError("apply_costs: gross returns, weights and asset returns are misaligned");
  if (tc_bps < 0.0) throw ParameterError("apply_costs: transaction cost must be >= 0");
  CostResult out{VectorXd(t), VectorXd::Zero(t)};
  for (Eigen::Index s = 0; s < t; ++s) {
    if (s == 0) {
      if (charge_entry) out.turnover(0) = weights.row(0).cwiseAbs().sum();
    } else {
      const Eigen::RowVectorXd grown =
          weights.row(s - 1).array() * (1.0 + returns.row(s - 1).array());
      const double total = grown.sum();
      out.turnover(s) = total != 0.0 ? (weights.row(s) - grown / total).cwiseAbs().sum()
                                     : weights.row(s).cwiseAbs().sum();
    }
    out.net(s) = gross(s) - tc_bps * 1e-4 * out.turnover(s);
  }
  return out;
}

Performance performance(const VectorXd& net, int periods_per_year) {
  const auto t = net.size();
  if (t < 2) throw ParameterError("performance: need at least two returns");
  const double mean = net.mean();
  const double var = (net.array() - mean).square().sum() / static_cast<double>(t - 1);
  Performance p;
  p.mean = periods_per_year * mean;
  p.sd = std::sqrt(periods_per_year * var);
  if (!(p.sd > 0.0)) throw NumericError("performance: zero return variance, Sharpe ratio undefined");
  p.sr = p.mean / p.sd;
  return p;
}

double management_fee_per_period(const VectorXd& candidate, const VectorXd& benchmark,
                                 double gamma) {
  if (candidate.size() != benchmark.size() || candidate.size() == 0)
    throw ShapeError("management_fee: series must be non-empty and of equal length");
  if (!(gamma > 0.0)) throw ParameterError("management_fee: gamma must be positive");
  const double c = gamma / (2.0 * (1.0 + gamma));
  const double t = static_cast<double>(candidate.size());
  const double s1 = candidate.sum();
  const double s2 = candidate.squaredNorm();
  const double gap = (s1 - c * s2) - (benchmark.sum() - c * benchmark.squaredNorm());
  if (gap == 0.0) return 0.0;
  // c T phi^2 + (T - 2 c S1) phi - gap = 0
  const double qa = c * t;
  const double qb = t - 2.0 * c * s1;
  const double disc = qb * qb + 4.0 * qa * gap;
  if (disc < 0.0)
    throw NumericError("management_fee: no real root (discriminant " + std::to_string(disc) +
                       "); utility gap exceeds the attainable range");
  // Stable form of the root nearest zero.
  const double denom = qb + std::copysign(std::sqrt(disc), qb);
  if (denom == 0.0) throw NumericError("management_fee: degenerate quadratic");
  return 2.0 * gap / denom;
}

double management_fee(const VectorXd& candidate, const VectorXd& benchmark, double gamma,
                      int periods_per_year) {
  return periods_per_year * management_fee_per_period(candidate, benchmark, gamma) * 1e4;
}

double hit_rate(const MatrixXd& forecasts, const MatrixXd& realized) {
  if (forecasts.rows() != realized.rows() || forecasts.cols() != realized.cols())
    throw ShapeError("hit_rate: forecast and realized panels are misaligned");
  if (forecasts.size() == 0) return 0.0;
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < forecasts.rows(); ++i)
    for (Eigen::Index j = 0; j < forecasts.cols(); ++j)
      hits += (forecasts(i, j) > 0.0) == (realized(i, j) > 0.0);
  return 100.0 * static_cast<double>(hits) / static_cast<double>(forecasts.size());
}

VectorXd momentum_signal(const MatrixXd& returns, int t) {
  if (t < 52 || t > returns.rows())
    throw WindowError("momentum_signal: need 52 periods of history before row " +
                      std::to_string(t));
  return returns.middleRows(t - 52, 48).colwise().mean().transpose();
}

}  // namespace drfdm
