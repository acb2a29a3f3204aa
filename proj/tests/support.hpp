#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "drfdm/dlm.hpp"
#include "drfdm/ordering.hpp"
#include "drfdm/recouple.hpp"

namespace drfdm::testing {

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = z(rng);
  return a * a.transpose() / n + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

/// Batch Normal / inverse-gamma regression with the prior implied by an
/// NGState (theta | phi ~ N(m, C / (s phi)), phi ~ Ga(n/2, n s/2)).
struct BatchPosterior {
  Eigen::VectorXd m;
  Eigen::MatrixXd C;
  double n = 0.0;
  double s = 0.0;
};

inline BatchPosterior batch_conjugate(const NGState& prior, const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& y) {
  const Eigen::MatrixXd p0 = (prior.C / prior.s).inverse();
  const Eigen::MatrixXd pt = p0 + x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(pt);
  BatchPosterior out;
  out.m = ldlt.solve(p0 * prior.m + x.transpose() * y);
  out.n = prior.n + static_cast<double>(y.size());
  const Eigen::VectorXd dm = out.m - prior.m;
  const double ns = prior.n * prior.s + (y - x * out.m).squaredNorm() + dm.dot(p0 * dm);
  out.s = ns / out.n;
  out.C = out.s * ldlt.solve(Eigen::MatrixXd::Identity(pt.rows(), pt.cols()));
  return out;
}

/// Sample moments of the joint vector (canonical factors, then assets) drawn
/// sequentially from the per-equation Student-t predictives, with standard
/// errors of every mean and covariance entry.
struct SampledMoments {
  Eigen::VectorXd mean, mean_se;
  Eigen::MatrixXd cov, cov_se;
};

inline SampledMoments sample_joint(std::span<const PriorState> factor_priors, const Permutation& perm,
                                   std::span<const EquationSelection> assets, long draws,
                                   std::mt19937_64& rng) {
  const int k = static_cast<int>(perm.size());
  const int n = static_cast<int>(assets.size());
  const int d = k + n;
  std::normal_distribution<double> z;
  auto student = [&](double dof) {
    std::chi_squared_distribution<double> chi(dof);
    return z(rng) / std::sqrt(chi(rng) / dof);
  };
  auto draw_eq = [&](const PriorState& p, const Eigen::VectorXd& x) {
    const double loc = x.dot(p.a);
    const double q = p.s_prev + x.dot(p.R * x);
    return loc + std::sqrt(q) * student(p.r);
  };
  Eigen::MatrixXd xs(d, draws);
  Eigen::VectorXd pos(k);
  for (long m = 0; m < draws; ++m) {
    auto v = xs.col(m);
    for (int p = 0; p < k; ++p) {
      Eigen::VectorXd x(p + 1);
      x(0) = 1.0;
      x.tail(p) = pos.head(p);
      pos(p) = draw_eq(factor_priors[static_cast<std::size_t>(p)], x);
      v(perm[static_cast<std::size_t>(p)]) = pos(p);
    }
    for (int i = 0; i < n; ++i) {
      const auto& sel = assets[static_cast<std::size_t>(i)];
      Eigen::VectorXd x(1 + __builtin_popcount(sel.parents));
      x(0) = 1.0;
      int j = 1;
      for (int f = 0; f < k; ++f)
        if (sel.parents & (1u << f)) x(j++) = v(f);
      v(k + i) = draw_eq(sel.prior, x);
    }
  }
  SampledMoments out;
  out.mean = xs.rowwise().mean();
  Eigen::MatrixXd s1 = Eigen::MatrixXd::Zero(d, d), s2 = Eigen::MatrixXd::Zero(d, d);
  for (long m = 0; m < draws; ++m) {
    const Eigen::VectorXd c = xs.col(m) - out.mean;
    const Eigen::MatrixXd prod = c * c.transpose();
    s1 += prod;
    s2 += prod.cwiseProduct(prod);
  }
  const double m = static_cast<double>(draws);
  out.cov = s1 / (m - 1.0);
  const Eigen::MatrixXd second = s1 / m;
  out.cov_se = ((s2 / m - second.cwiseProduct(second)) / m).cwiseSqrt();
  out.mean_se = (second.diagonal() / m).cwiseSqrt();
  return out;
}

}  // namespace drfdm::testing
