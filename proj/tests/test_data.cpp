#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "drfdm/data.hpp"
#include "drfdm/error.hpp"

using namespace drfdm;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("drfdm_test_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& body) const {
    const fs::path p = path / name;
    std::ofstream(p) << body;
    return p;
  }
};

std::string csv(const std::string& head, int from, int to, double scale) {
  std::string s = head + "\n";
  for (int d = from; d <= to; ++d)
    s += "d" + std::to_string(d) + "," + std::to_string(scale * d) + "," + std::to_string(-scale * d) + "\n";
  return s;
}

SyntheticSpec constant_spec(int n, int k, int t, double loading, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_assets = n;
  s.n_factors = k;
  s.periods = t;
  s.train_len = t / 4;
  s.loadings.assign(n, std::vector<LoadingPath>(k, LoadingPath{loading, 0.0, {}}));
  s.factor_cov = MatrixXd::Identity(k, k) * 0.01;
  s.idio_var = VectorXd::LinSpaced(n, 0.001, 0.004);
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("joining asset and factor files") {
  TempDir dir("join");
  const auto a = dir.file("a.csv", csv("date,A,B", 1, 5, 0.01));
  const auto f = dir.file("f.csv", csv("date,F1,F2", 1, 5, 0.02));
  const auto p = load_panel(a, f, 2);
  CHECK(p.periods() == 5);
  CHECK(p.asset_names == std::vector<std::string>{"A", "B"});
  CHECK(p.factor_names == std::vector<std::string>{"F1", "F2"});
  CHECK(p.returns(4, 0) == doctest::Approx(0.05));
  CHECK(p.factors(0, 1) == doctest::Approx(-0.02));

  const auto f2 = dir.file("f2.csv", csv("date,F1,F2", 3, 7, 0.02));
  const auto q = load_panel(a, f2, 1);
  REQUIRE(q.periods() == 3);
  CHECK(q.dates == std::vector<std::string>{"d3", "d4", "d5"});
  CHECK(q.returns(0, 0) == doctest::Approx(0.03));
  CHECK(q.factors(0, 0) == doctest::Approx(0.06));

  const auto f3 = dir.file("f3.csv", csv("date,F1,F2", 8, 9, 0.02));
  CHECK_THROWS_AS(load_panel(a, f3, 1), AlignmentError);
}

TEST_CASE("unsorted input is sorted by date") {
  TempDir dir("sort");
  const auto a = dir.file("a.csv", "date,A\n2020-03,3\n2020-01,1\n2020-02,2\n");
  const auto f = dir.file("f.csv", "date,F\n2020-02,20\n2020-03,30\n2020-01,10\n");
  const auto p = load_panel(a, f, 1);
  CHECK(p.dates == std::vector<std::string>{"2020-01", "2020-02", "2020-03"});
  CHECK(p.returns(0, 0) == 1.0);
  CHECK(p.factors(2, 0) == 30.0);
}

TEST_CASE("format and integrity errors") {
  TempDir dir("errors");
  const auto a = dir.file("a.csv", csv("date,A,B", 1, 5, 0.01));
  const auto bad = dir.file("bad.csv", "date,F1,F2\nd1,0.1,0.2\nd2,oops,0.3\n");
  try {
    load_panel(a, bad, 1);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("oops") != std::string::npos);
    CHECK(msg.find("row 3") != std::string::npos);
    CHECK(msg.find("F1") != std::string::npos);
  }
  const auto dup = dir.file("dup.csv", "date,F1,F2\nd1,0.1,0.2\nd1,0.1,0.3\nd2,0,0\n");
  CHECK_THROWS_AS(load_panel(a, dup, 1), IntegrityError);
  CHECK_THROWS_AS(load_panel(a, dir.path / "missing.csv", 1), DataError);
  const auto ragged = dir.file("ragged.csv", "date,F1,F2\nd1,0.1\n");
  CHECK_THROWS_AS(read_table(ragged), FormatError);
  const auto quote = dir.file("quote.csv", "date,F1\n\"d1,0.1\n");
  CHECK_THROWS_AS(read_table(quote), FormatError);
}

TEST_CASE("missing cells drop the row") {
  TempDir dir("missing");
  const auto a = dir.file("a.csv", "date,A,B\nd1,0.1,0.2\nd2,,0.3\nd3,0.4,0.5\n");
  const auto t = read_table(a);
  CHECK(t.labels == std::vector<std::string>{"d1", "d3"});
  CHECK(t.values(1, 1) == 0.5);
}

TEST_CASE("quoted headers") {
  TempDir dir("quoted");
  const auto a = dir.file("a.csv", "date,\"Asset, One\",\"Say \"\"hi\"\"\"\nd1,1,2\n");
  const auto t = read_table(a);
  CHECK(t.header == std::vector<std::string>{"Asset, One", "Say \"hi\""});
}

TEST_CASE("save and reload is the identity") {
  TempDir dir("roundtrip");
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  ReturnPanel p;
  const int t = 30;
  for (int i = 0; i < t; ++i) p.dates.push_back("w" + std::to_string(1000 + i));
  p.asset_names = {"x", "y,z", "w"};
  p.factor_names = {"mkt", "smb"};
  p.returns = MatrixXd::NullaryExpr(t, 3, [&] { return 0.01 * z(rng); });
  p.factors = MatrixXd::NullaryExpr(t, 2, [&] { return 0.01 * z(rng); });
  p.train_len = 10;
  save_panel(p, dir.path / "a.csv", dir.path / "f.csv");
  const auto q = load_panel(dir.path / "a.csv", dir.path / "f.csv", 10);
  CHECK(q.dates == p.dates);
  CHECK(q.asset_names == p.asset_names);
  CHECK(q.returns == p.returns);
  CHECK(q.factors == p.factors);
  save_panel(q, dir.path / "a2.csv", dir.path / "f2.csv");
  const auto r = load_panel(dir.path / "a2.csv", dir.path / "f2.csv", 10);
  CHECK(r.returns == q.returns);
}

TEST_CASE("panel invariants") {
  ReturnPanel p;
  p.dates = {"a", "b", "c"};
  p.asset_names = {"x"};
  p.factor_names = {"f"};
  p.returns = MatrixXd::Zero(3, 1);
  p.factors = MatrixXd::Zero(3, 1);
  p.train_len = 1;
  CHECK_NOTHROW(p.validate());
  p.train_len = 3;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p.train_len = 0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p.train_len = 1;
  p.factors = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(p.validate(), ShapeError);
  CHECK_THROWS_AS(p.with_factors({1}), ParameterError);
}

TEST_CASE("synthetic panels") {
  const auto spec = default_synthetic_spec(6, 3, 120, 40, 11);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.panel.returns == b.panel.returns);
  CHECK(a.panel.factors == b.panel.factors);
  CHECK_NOTHROW(a.panel.validate());
  CHECK(a.truth.loadings.size() == 120u);
  auto other = spec;
  other.seed = 12;
  CHECK(generate_synthetic(other).panel.returns != a.panel.returns);

  // Unit loadings with vanishing noise copy the factor.
  auto copy = constant_spec(4, 1, 50, 1.0, 3);
  copy.idio_var = VectorXd::Constant(4, 1e-300);
  const auto c = generate_synthetic(copy);
  for (int j = 0; j < 4; ++j) CHECK((c.panel.returns.col(j) - c.panel.factors.col(0)).cwiseAbs().maxCoeff() < 1e-140);

  // Zero loadings leave diagonal idiosyncratic noise.
  const int t = 5000;
  const auto zero = generate_synthetic(constant_spec(3, 2, t, 0.0, 5));
  const MatrixXd x = zero.panel.returns.rowwise() - zero.panel.returns.colwise().mean();
  const MatrixXd s = x.transpose() * x / (t - 1.0);
  const VectorXd idio = VectorXd::LinSpaced(3, 0.001, 0.004);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double truth = i == j ? idio(i) : 0.0;
      const double se = i == j ? idio(i) * std::sqrt(2.0 / t) : std::sqrt(idio(i) * idio(j) / t);
      CHECK(std::abs(s(i, j) - truth) < 3.0 * se);
    }

  // Residuals against the recorded truth have the idiosyncratic covariance.
  const auto g = generate_synthetic(constant_spec(3, 2, t, 0.7, 6));
  MatrixXd e(t, 3);
  for (int r = 0; r < t; ++r)
    e.row(r) = g.panel.returns.row(r) - g.truth.alpha.transpose() -
               (g.truth.loadings[r] * g.panel.factors.row(r).transpose()).transpose();
  const MatrixXd se2 = e.transpose() * e / static_cast<double>(t);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(se2(i, i) - idio(i)) < 3.0 * idio(i) * std::sqrt(2.0 / t));

  auto bad = constant_spec(2, 2, 10, 0.0, 1);
  bad.factor_cov(1, 1) = -1.0;
  CHECK_THROWS_AS(generate_synthetic(bad), ParameterError);
  bad = constant_spec(2, 2, 10, 0.0, 1);
  bad.idio_var(0) = 0.0;
  CHECK_THROWS_AS(generate_synthetic(bad), ParameterError);
}

TEST_CASE("zero segments and the truth sidecar") {
  auto spec = constant_spec(2, 2, 40, 0.5, 9);
  spec.loadings[1][1].zeros = {{10, 20}};
  spec.loadings[0][0].walk_sd = 0.05;
  const auto g = generate_synthetic(spec);
  for (int t = 0; t < 40; ++t) CHECK((g.truth.loadings[t](1, 1) == 0.0) == (t >= 10 && t < 20));
  CHECK(g.truth.loadings[39](0, 0) != 0.5);

  TempDir dir("truth");
  write_truth(g.truth, dir.path / "truth.json");
  const auto back = read_truth(dir.path / "truth.json");
  REQUIRE(back.loadings.size() == g.truth.loadings.size());
  for (std::size_t t = 0; t < back.loadings.size(); ++t) CHECK(back.loadings[t] == g.truth.loadings[t]);
  CHECK(back.idio_var == g.truth.idio_var);
  CHECK(back.factor_cov == g.truth.factor_cov);
  const auto junk = dir.file("junk.json", "{not json");
  CHECK_THROWS_AS(read_truth(junk), FormatError);
}
