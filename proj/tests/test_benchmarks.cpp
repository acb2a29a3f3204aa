#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "drfdm/benchmarks.hpp"
#include "drfdm/error.hpp"
#include "support.hpp"

using namespace drfdm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian_rows(int t, const MatrixXd& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  const MatrixXd l = cov.llt().matrixL();
  MatrixXd out(t, cov.rows());
  for (int i = 0; i < t; ++i) {
    VectorXd e(cov.rows());
    for (Eigen::Index j = 0; j < e.size(); ++j) e(j) = z(rng);
    out.row(i) = (l * e).transpose();
  }
  return out;
}

// Ledoit-Wolf constant-correlation intensity written as explicit sums.
double lw_intensity_loops(const MatrixXd& window) {
  const auto t = window.rows(), n = window.cols();
  const MatrixXd x = window.rowwise() - window.colwise().mean();
  MatrixXd s = MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < t; ++r) s += x.row(r).transpose() * x.row(r);
  s /= static_cast<double>(t);
  double rbar = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) rbar += s(i, j) / std::sqrt(s(i, i) * s(j, j));
  rbar /= static_cast<double>(n * (n - 1));
  double pi = 0.0, rho = 0.0, gamma = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double pij = 0.0, tii = 0.0, tjj = 0.0;
      for (Eigen::Index r = 0; r < t; ++r) {
        const double xij = x(r, i) * x(r, j) - s(i, j);
        pij += xij * xij;
        tii += (x(r, i) * x(r, i) - s(i, i)) * xij;
        tjj += (x(r, j) * x(r, j) - s(j, j)) * xij;
      }
      pij /= static_cast<double>(t);
      tii /= static_cast<double>(t);
      tjj /= static_cast<double>(t);
      pi += pij;
      if (i == j) {
        rho += pij;
      } else {
        rho += 0.5 * rbar * (std::sqrt(s(j, j) / s(i, i)) * tii + std::sqrt(s(i, i) / s(j, j)) * tjj);
        const double f = rbar * std::sqrt(s(i, i) * s(j, j));
        gamma += (f - s(i, j)) * (f - s(i, j));
      }
    }
  return std::clamp((pi - rho) / gamma / static_cast<double>(t), 0.0, 1.0);
}

ReturnPanel panel_from(const MatrixXd& r, const MatrixXd& f, int train) {
  ReturnPanel p;
  for (Eigen::Index i = 0; i < r.rows(); ++i) p.dates.push_back(std::to_string(i));
  for (Eigen::Index i = 0; i < r.cols(); ++i) p.asset_names.push_back("a" + std::to_string(i));
  for (Eigen::Index i = 0; i < f.cols(); ++i) p.factor_names.push_back("f" + std::to_string(i));
  p.returns = r;
  p.factors = f;
  p.train_len = train;
  return p;
}

}  // namespace

TEST_CASE("EWMA recursion") {
  const MatrixXd s0 = MatrixXd::Constant(1, 1, 0.0);
  MatrixXd s = s0;
  for (double y : {1.0, 2.0, 0.0}) s = ewma_cov(s, VectorXd::Constant(1, y), 0.97);
  CHECK(s(0, 0) == doctest::Approx(0.144627).epsilon(1e-14));

  std::mt19937_64 rng(1);
  const MatrixXd prev = testing::random_spd(3, rng);
  CHECK((ewma_cov(prev, VectorXd::Zero(3), 0.99) - 0.99 * prev).norm() < 1e-15);
  const VectorXd y = testing::random_vector(3, rng);
  const MatrixXd one = ewma_cov(MatrixXd::Zero(3, 3), y, 0.97);
  CHECK((one - 0.03 * y * y.transpose()).norm() < 1e-15);
  CHECK(Eigen::FullPivLU<MatrixXd>(one).rank() == 1);
  CHECK_THROWS_AS(ewma_cov(prev, y, 1.0), ParameterError);
  CHECK_THROWS_AS(ewma_cov(prev, y, 0.0), ParameterError);

  // Long-run scale matches the generating covariance.
  const MatrixXd v = testing::random_spd(2, rng, 0.5);
  const MatrixXd ys = gaussian_rows(20000, v, rng);
  MatrixXd acc = MatrixXd::Zero(2, 2);
  MatrixXd cur = v;
  for (int t = 0; t < ys.rows(); ++t) {
    cur = ewma_cov(cur, ys.row(t).transpose(), 0.97);
    acc += cur;
  }
  acc /= static_cast<double>(ys.rows());
  CHECK(((acc - v).cwiseAbs().array() / v.diagonal().maxCoeff()).maxCoeff() < 0.05);
}

TEST_CASE("Ledoit-Wolf shrinkage") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd w = gaussian_rows(60 + 10 * rep, testing::random_spd(4, rng, 0.3), rng);
    const auto res = lw_shrinkage(w);
    const MatrixXd x = w.rowwise() - w.colwise().mean();
    const MatrixXd s = x.transpose() * x / static_cast<double>(w.rows());
    CHECK((res.cov.diagonal() - s.diagonal()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.intensity >= 0.0);
    CHECK(res.intensity <= 1.0);
    CHECK(res.intensity == doctest::Approx(lw_intensity_loops(w)).epsilon(1e-10));
    CHECK((res.cov - res.cov.transpose()).norm() == 0.0);
  }

  // Equal correlations: the target equals the sample covariance.
  MatrixXd eq(3, 3);
  eq << 1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0;
  const MatrixXd w = gaussian_rows(100000, eq, rng);
  const auto r = lw_shrinkage(w);
  const MatrixXd x = w.rowwise() - w.colwise().mean();
  const MatrixXd s = x.transpose() * x / static_cast<double>(w.rows());
  CHECK((r.cov - s).cwiseAbs().maxCoeff() < 0.01);

  // Uncorrelated assets shrink toward zero correlation.
  const MatrixXd u = gaussian_rows(20000, MatrixXd::Identity(2, 2), rng);
  const auto ru = lw_shrinkage(u);
  CHECK(std::abs(ru.cov(0, 1)) < 3.0 / std::sqrt(20000.0));

  MatrixXd flat = gaussian_rows(10, MatrixXd::Identity(2, 2), rng);
  flat.col(1).setConstant(0.3);
  try {
    lw_shrinkage(flat);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("asset 1") != std::string::npos);
  }
  CHECK_THROWS_AS(lw_shrinkage(flat.topRows(2)), ParameterError);
}

TEST_CASE("exact factor model") {
  // Scalar hand case.
  const VectorXd f = (VectorXd(5) << 0.01, -0.02, 0.03, 0.0, 0.015).finished();
  const VectorXd e = (VectorXd(5) << 0.001, -0.002, 0.0005, 0.002, -0.0015).finished();
  const VectorXd r = 0.002 + 1.5 * f.array() + e.array();
  const double fbar = f.mean(), rbar = r.mean();
  const double sff = (f.array() - fbar).square().sum();
  const double sfr = ((f.array() - fbar) * (r.array() - rbar)).sum();
  const double beta = sfr / sff;
  const double a = rbar - beta * fbar;
  const double rss = (r.array() - a - beta * f.array()).square().sum();
  const double expected = beta * beta * sff / 4.0 + rss / 3.0;
  CHECK(efm_cov(r, f)(0, 0) == doctest::Approx(expected).epsilon(1e-12));

  // Zero factor variance gives a diagonal matrix.
  std::mt19937_64 rng(3);
  const MatrixXd b = MatrixXd::NullaryExpr(4, 2, [&] { return std::normal_distribution<double>()(rng); });
  const MatrixXd fc = factor_model_cov(b, MatrixXd::Zero(2, 2), VectorXd::Constant(4, 0.3));
  CHECK((fc - 0.3 * MatrixXd::Identity(4, 4)).norm() == 0.0);

  // Convergence to the generating model.
  const int t = 20000;
  MatrixXd fcov(2, 2);
  fcov << 0.02, 0.005, 0.005, 0.01;
  const VectorXd idio = (VectorXd(4) << 0.01, 0.02, 0.015, 0.005).finished();
  const MatrixXd fw = gaussian_rows(t, fcov, rng);
  const MatrixXd ew = gaussian_rows(t, idio.asDiagonal().toDenseMatrix(), rng);
  const MatrixXd rw = fw * b.transpose() + ew;
  const MatrixXd est = efm_cov(rw, fw);
  const MatrixXd truth = factor_model_cov(b, fcov, idio);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((truth(i, j) * truth(i, j) + truth(i, i) * truth(j, j)) / t);
      CHECK(std::abs(est(i, j) - truth(i, j)) < 3.0 * se);
    }
  CHECK_THROWS_AS(efm_cov(rw.topRows(3), fw.topRows(3)), ParameterError);
  MatrixXd dup(10, 2);
  dup.col(0) = fw.col(0).head(10);
  dup.col(1) = 2.0 * dup.col(0);
  CHECK_THROWS_AS(efm_cov(rw.topRows(10), dup), NumericError);
}

TEST_CASE("Wishart DLM scalar recursion") {
  auto s = wishart_init(1, 0.1, 0.997, 0.99);
  const auto a = wishart_dlm_step(s, VectorXd::Constant(1, 0.5));
  CHECK(a.forecast.mean(0) == 0.0);
  CHECK(a.forecast.cov(0, 0) == doctest::Approx(0.251009992001320416947).epsilon(1e-14));
  CHECK(a.state.m(0) == doctest::Approx(0.250375563345017526289).epsilon(1e-14));
  CHECK(a.state.c == doctest::Approx(0.500751126690035052579).epsilon(1e-14));
  CHECK(a.state.S(0, 0) == doctest::Approx(0.102276350305274425400).epsilon(1e-14));
  CHECK(a.state.n == doctest::Approx(10.9).epsilon(1e-15));
  const auto b = wishart_dlm_step(a.state, VectorXd::Constant(1, -0.2));
  CHECK(b.forecast.cov(0, 0) == doctest::Approx(0.188600626528355304909).epsilon(1e-14));
  CHECK(b.state.m(0) == doctest::Approx(0.0997990978963954973054).epsilon(1e-14));
  CHECK(b.state.c == doctest::Approx(0.334335336336333324306).epsilon(1e-14));
  CHECK(b.state.S(0, 0) == doctest::Approx(0.105053539458030150572).epsilon(1e-14));
  CHECK(b.state.n == doctest::Approx(11.791).epsilon(1e-15));

  // Zero innovation leaves the level and shrinks S toward its prior.
  const auto z = wishart_dlm_step(a.state, a.state.m);
  CHECK(z.state.m(0) == a.state.m(0));
  const double nu = 0.99 * a.state.n;
  CHECK(z.state.S(0, 0) == doctest::Approx(nu * a.state.S(0, 0) / (nu + 1.0)).epsilon(1e-15));
}

TEST_CASE("Wishart DLM without discounting is conjugate") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 2 + rep % 3, t = 40;
    const MatrixXd ys = gaussian_rows(t, testing::random_spd(n, rng, 0.2), rng);
    auto s = wishart_init(n, 0.1, 1.0, 1.0, 1.0, 10.0);
    for (int i = 0; i < t; ++i) s = wishart_dlm_step(s, ys.row(i).transpose()).state;
    const VectorXd ybar = ys.colwise().mean();
    const MatrixXd x = ys.rowwise() - ybar.transpose();
    const double k0 = 1.0;
    const MatrixXd scatter = 10.0 * 0.1 * MatrixXd::Identity(n, n) + x.transpose() * x +
                             (k0 * t / (k0 + t)) * ybar * ybar.transpose();
    CHECK((s.m - t * ybar / (k0 + t)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.c == doctest::Approx(1.0 / (k0 + t)).epsilon(1e-12));
    CHECK(s.n == doctest::Approx(10.0 + t).epsilon(1e-14));
    CHECK((s.S * s.n - scatter).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("Wishart log density") {
  std::mt19937_64 rng(5);
  WishartForecast fc;
  fc.mean = testing::random_vector(1, rng);
  fc.scale = MatrixXd::Constant(1, 1, 0.3);
  fc.dof = 7.0;
  const double y = 0.4;
  const double z = (y - fc.mean(0)) / std::sqrt(0.3);
  const double direct = std::lgamma(4.0) - std::lgamma(3.5) - 0.5 * std::log(7.0 * std::numbers::pi * 0.3) -
                        4.0 * std::log1p(z * z / 7.0);
  CHECK(wishart_log_density(fc, VectorXd::Constant(1, y)) == doctest::Approx(direct).epsilon(1e-13));
}

TEST_CASE("equal weights and regularization") {
  CHECK(ew_weights(1)(0) == 1.0);
  for (double v : ew_weights(4)) CHECK(v == 0.25);
  std::mt19937_64 rng(6);
  for (int n = 1; n < 30; n += 7) CHECK(ew_weights(n).sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(ew_weights(0), ParameterError);
  MatrixXd a = testing::random_spd(3, rng);
  a(0, 1) += 1e-9;
  const MatrixXd r = regularize(a, 1e-8);
  CHECK(r == r.transpose());
  CHECK(r(2, 2) - a(2, 2) == doctest::Approx(1e-8 * a.trace() / 3.0).epsilon(1e-6));
}

TEST_CASE("sequential estimators never read ahead") {
  std::mt19937_64 rng(7);
  const int t = 90, n = 4, k = 2;
  const MatrixXd f = gaussian_rows(t, 0.01 * MatrixXd::Identity(k, k), rng);
  const MatrixXd r = f * MatrixXd::Constant(k, n, 0.8) + gaussian_rows(t, 0.005 * MatrixXd::Identity(n, n), rng);
  const ReturnPanel base = panel_from(r, f, 60);
  const int probe = 70;
  ReturnPanel bumped = base;
  bumped.returns.bottomRows(t - probe).array() += 0.3;
  bumped.factors.bottomRows(t - probe).array() -= 0.2;
  for (const char* name : {"ewma97", "ewma99", "lw", "efm", "wdlm", "fwdlm", "ew"}) {
    CAPTURE(name);
    BenchmarkOptions opts;
    opts.window = 50;
    auto a = make_benchmark(name, opts);
    auto b = make_benchmark(name, opts);
    a->start(base);
    b->start(bumped);
    for (int s = 0; s < base.train_len; ++s) {
      a->observe(base, s);
      b->observe(bumped, s);
    }
    for (int s = base.train_len; s <= probe; ++s) {
      const auto ma = a->forecast(base, s);
      const auto mb = b->forecast(bumped, s);
      CHECK(ma.cov == mb.cov);
      CHECK(ma.mean == mb.mean);
      CHECK(ma.cov.rows() == n);
      CHECK((ma.cov - ma.cov.transpose()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(ma.cov).eigenvalues().minCoeff() > -1e-10);
      a->observe(base, s);
      b->observe(bumped, s);
    }
    CHECK(a->equal_weight() == (std::string(name) == "ew"));
  }
  CHECK(make_benchmark("ewma97")->name() == "EWMA(0.97)");
  CHECK(make_benchmark("fwdlm")->name() == "Factor-W-DLM");
  CHECK_THROWS_AS(make_benchmark("dcc"), ParameterError);
}
