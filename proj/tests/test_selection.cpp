#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "drfdm/error.hpp"
#include "drfdm/selection.hpp"
#include "support.hpp"

using namespace drfdm;
using Eigen::VectorXd;

namespace {

double prob_sum(const std::vector<double>& lp) {
  double s = 0.0;
  for (double v : lp) s += std::exp(v);
  return s;
}

}  // namespace

TEST_CASE("pool sizes") {
  PoolOptions opts;
  const auto big = build_asset_pool(5, opts, 1.0);
  CHECK(big.size() == 279);
  CHECK(prob_sum(big.log_probs) == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& s : big.specs) CHECK(s.parents != 0u);

  PoolOptions one{{1.0}, {1.0}, 0.99};
  const auto single = build_asset_pool(1, one, 1.0);
  REQUIRE(single.size() == 1);
  CHECK(single.log_probs[0] == 0.0);

  PoolOptions fopts{{0.998, 0.999, 1.0}, {0.999, 1.0}, 0.99};
  const auto fp = build_factor_pool(2, fopts, 1.0);
  CHECK(fp.size() == 6);
  for (const auto& s : fp.specs) CHECK(s.parents == 0b11u);
  CHECK(build_factor_pool(0, fopts, 1.0).specs[0].dim() == 1);

  CHECK_THROWS_AS(build_asset_pool(0, opts, 1.0), ParameterError);
  CHECK_THROWS_AS(build_asset_pool(2, PoolOptions{{}, {1.0}, 0.99}, 1.0), ParameterError);
  CHECK_THROWS_AS(build_asset_pool(2, PoolOptions{{1.0}, {1.0}, 0.0}, 1.0), ParameterError);
}

TEST_CASE("asset pool ordering is mask-major") {
  PoolOptions opts{{0.99, 1.0}, {0.98, 1.0}, 0.99};
  const auto p = build_asset_pool(2, opts, 1.0);
  REQUIRE(p.size() == 12);
  CHECK(p.specs[0] == ModelSpec{1u, 0.99, 0.98});
  CHECK(p.specs[1] == ModelSpec{1u, 0.99, 1.0});
  CHECK(p.specs[2] == ModelSpec{1u, 1.0, 0.98});
  CHECK(p.specs[4].parents == 2u);
  CHECK(p.specs[11] == ModelSpec{3u, 1.0, 1.0});
}

TEST_CASE("forgetting step") {
  const std::vector<double> lp{std::log(0.8), std::log(0.2)};
  CHECK(predict_probs(lp, 1.0)[0] == doctest::Approx(lp[0]).epsilon(1e-15));
  const auto out = predict_probs(lp, 0.99);
  const long double a = std::pow(0.8L, 0.99L), b = std::pow(0.2L, 0.99L);
  CHECK(std::exp(out[0]) == doctest::Approx(static_cast<double>(a / (a + b))).epsilon(1e-14));
  CHECK(std::exp(out[1]) == doctest::Approx(static_cast<double>(b / (a + b))).epsilon(1e-14));
  CHECK(std::exp(out[0]) == doctest::Approx(0.797772701618942685).epsilon(1e-14));
  CHECK(std::exp(out[1]) == doctest::Approx(0.202227298381057315).epsilon(1e-14));

  const std::vector<double> uni(4, std::log(0.25));
  for (double v : predict_probs(uni, 0.9)) CHECK(v == doctest::Approx(std::log(0.25)).epsilon(1e-14));
}

TEST_CASE("Bayes step") {
  const std::vector<double> pred{std::log(0.3), std::log(0.7)};
  const auto same = update_probs(pred, std::vector<double>{-2.0, -2.0});
  CHECK(same[0] == doctest::Approx(pred[0]).epsilon(1e-14));
  const auto dom = update_probs(std::vector<double>{std::log(0.5), std::log(0.5)}, std::vector<double>{0.0, -1e6});
  CHECK(std::exp(dom[0]) == doctest::Approx(1.0));
  CHECK(std::exp(dom[1]) < 1e-300);
  const auto huge = update_probs(pred, std::vector<double>{-5000.0, -5001.0});
  CHECK(prob_sum(huge) == doctest::Approx(1.0).epsilon(1e-12));
  try {
    update_probs(pred, std::vector<double>{0.0, std::nan("")});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("model 1") != std::string::npos);
  }
}

TEST_CASE("argmax and tie-break") {
  CHECK(argmax(std::vector<double>{std::log(0.2), std::log(0.5), std::log(0.3)}) == 1);
  CHECK(argmax(std::vector<double>{std::log(0.5), std::log(0.5)}) == 0);
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const VectorXd w = testing::random_vector(7, rng);
    std::vector<double> a(7), b(7);
    for (int i = 0; i < 7; ++i) {
      a[i] = w(i);
      b[i] = w(i) + std::log(3.7);
    }
    CHECK(argmax(a) == argmax(b));
  }
}

TEST_CASE("inclusion probabilities") {
  PoolOptions one{{1.0}, {1.0}, 1.0};
  auto p = build_asset_pool(2, one, 1.0);  // masks 01, 10, 11
  CHECK(inclusion_probability(p, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(inclusion_probability(p, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(inclusion_probability(p, 2), ParameterError);
  CHECK_THROWS_AS(inclusion_probability(p, -1), ParameterError);

  // Include plus exclude partitions the pool.
  p.log_probs = {std::log(0.1), std::log(0.6), std::log(0.3)};
  double exclude = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p.specs[i].parents & 1u)) exclude += std::exp(p.log_probs[i]);
  CHECK(inclusion_probability(p, 0) + exclude == doctest::Approx(1.0).epsilon(1e-14));

  // Shifting mass toward a mask that contains the factor raises inclusion.
  const double before = inclusion_probability(p, 0);
  p.log_probs = {std::log(0.1), std::log(0.4), std::log(0.5)};
  CHECK(inclusion_probability(p, 0) > before);

  const auto single = build_asset_pool(1, one, 1.0);
  CHECK(inclusion_probability(single, 0) == 1.0);
}

TEST_CASE("regressor gathering follows the mask") {
  ScratchVector out;
  gather_regressor(0b101u, (VectorXd(3) << 2.0, 3.0, 4.0).finished(), out);
  REQUIRE(out.size() == 3);
  CHECK(out(0) == 1.0);
  CHECK(out(1) == 2.0);
  CHECK(out(2) == 4.0);
}

TEST_CASE("two-model log odds are a discounted likelihood ratio") {
  std::mt19937_64 rng(8);
  PoolOptions opts{{0.95, 1.0}, {1.0}, 0.9};
  auto pool = build_factor_pool(1, opts, 0.5);
  std::vector<double> diffs;
  for (int t = 0; t < 40; ++t) {
    const VectorXd x = testing::random_vector(1, rng);
    const double y = 0.3 + 0.8 * x(0) + testing::random_vector(1, rng, 0.6)(0);
    const auto d = assimilate_pool(pool, x, y);
    diffs.push_back(d[0] - d[1]);
    double expected = 0.0;
    for (std::size_t l = 0; l < diffs.size(); ++l)
      expected += std::pow(opts.alpha, static_cast<double>(l)) * diffs[diffs.size() - 1 - l];
    CHECK(pool.log_probs[0] - pool.log_probs[1] == doctest::Approx(expected).epsilon(1e-10));
    CHECK(prob_sum(pool.log_probs) == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK_NOTHROW(pool.validate());
}

TEST_CASE("no forgetting gives cumulative Bayes factors") {
  std::mt19937_64 rng(21);
  PoolOptions opts{{0.99, 1.0}, {0.98, 1.0}, 1.0};
  auto pool = build_asset_pool(2, opts, 0.3);
  std::vector<NGState> states = pool.states;
  std::vector<double> cum(pool.size(), 0.0);
  for (int t = 0; t < 100; ++t) {
    const VectorXd x = testing::random_vector(2, rng);
    const double y = 0.1 + x(0) + testing::random_vector(1, rng, 0.5)(0);
    assimilate_pool(pool, x, y);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      ScratchVector f;
      gather_regressor(pool.specs[i].parents, x, f);
      const auto prior = evolve(states[i], pool.specs[i].delta, pool.specs[i].kappa);
      cum[i] += log_predictive_density(forecast(prior, f), y);
      states[i] = update(prior, f, y);
    }
  }
  const double norm = log_sum_exp(cum);
  for (std::size_t i = 0; i < pool.size(); ++i)
    CHECK(std::abs(std::exp(pool.log_probs[i]) - std::exp(cum[i] - norm)) < 1e-8);
}
