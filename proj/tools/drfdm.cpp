#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "drfdm/config.hpp"
#include "drfdm/data.hpp"
#include "drfdm/engine.hpp"
#include "drfdm/error.hpp"
#include "drfdm/report.hpp"

namespace fs = std::filesystem;
using namespace drfdm;

namespace {

// Flag name (without dashes) -> config key.
const std::vector<std::pair<std::string, std::string>> kOverrides{
    {"assets", "assets"},   {"factors", "factors"},     {"strategy", "strategy"},
    {"tau", "tau"},         {"bound", "bound"},         {"tc", "tc"},
    {"gamma", "gamma"},     {"alpha", "alpha"},         {"ordering", "ordering"},
    {"factor-set", "factor_set"}, {"threads", "threads"}, {"seed", "seed"},
    {"out", "out"},         {"benchmarks", "benchmarks"}, {"train-len", "train_len"},
    {"set", ""},
};

struct RunOptions {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;  // raw key=value
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value config file (default: $" + std::string(kConfigEnvVar) + ")");
  for (const auto& [flag, key] : kOverrides) {
    if (flag == "set") {
      cmd->add_option("--set", o.sets, "any config setting as key=value (repeatable)");
      continue;
    }
    cmd->add_option("--" + flag, o.values[flag], "overrides config key '" + key + "'");
  }
}

std::pair<RunConfig, std::vector<std::pair<std::string, std::string>>> build_config(
    CLI::App* cmd, const RunOptions& o) {
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> prov;
  std::string path = o.config_path;
  if (path.empty())
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  if (!path.empty()) {
    apply_config_file(cfg, path);
    prov.emplace_back("config_file", path);
  }
  for (const auto& [flag, key] : kOverrides) {
    if (flag == "set" || cmd->count("--" + flag) == 0) continue;
    apply_setting(cfg, key, o.values.at(flag));
    prov.emplace_back("override", key + "=" + o.values.at(flag));
  }
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    prov.emplace_back("override", s);
  }
  validate(cfg);
  if (cfg.assets_path.empty() || cfg.factors_path.empty())
    throw ParameterError("asset and factor files are required (--assets, --factors or config)");
  for (const auto& kv : describe(cfg)) prov.push_back(kv);
  return {cfg, prov};
}

int run_backtest_cmd(CLI::App* cmd, const RunOptions& o) {
  auto [cfg, prov] = build_config(cmd, o);
  const auto panel = load_panel(cfg.assets_path, cfg.factors_path, cfg.train_len);
  std::cerr << "panel: " << panel.periods() << " periods, " << panel.n_assets() << " assets, "
            << panel.n_factors() << " factors, training " << (cfg.train_len > 0 ? cfg.train_len : panel.train_len)
            << '\n';
  const int total = panel.periods() - (cfg.train_len > 0 ? cfg.train_len : panel.train_len);
  const fs::path out = cfg.out_dir.empty() ? fs::path("results") : cfg.out_dir;
  std::unique_ptr<std::ofstream> diag;
  if (cfg.diagnostics) {
    fs::create_directories(out);
    diag = std::make_unique<std::ofstream>(out / "diagnostics.csv");
    if (!*diag) throw DataError("cannot write " + (out / "diagnostics.csv").string());
    const auto factors = prepare_panel(panel, cfg).factor_names;
    *diag << "date";
    for (const auto& a : panel.asset_names) *diag << ",f:" << a;
    for (const auto& a : panel.asset_names) *diag << ",var:" << a;
    for (const auto& a : panel.asset_names)
      for (const auto& f : factors) *diag << ",b:" << a << ':' << f;
    *diag << '\n' << std::setprecision(17);
  }
  int done = 0;
  auto report = run_backtest(panel, cfg, [&](const StepRecord& rec) {
    if (diag) {
      const auto& m = rec.moments;
      *diag << panel.dates[static_cast<std::size_t>(rec.t)];
      for (Eigen::Index i = 0; i < m.f.size(); ++i) *diag << ',' << m.f(i);
      for (Eigen::Index i = 0; i < m.sigma_r.rows(); ++i) *diag << ',' << m.sigma_r(i, i);
      for (Eigen::Index i = 0; i < m.loadings.rows(); ++i)
        for (Eigen::Index k = 0; k < m.loadings.cols(); ++k) *diag << ',' << m.loadings(i, k);
      *diag << '\n';
    }
    if (++done % 52 == 0 || done == total)
      std::cerr << "  " << done << "/" << total << " (" << panel.dates[static_cast<std::size_t>(rec.t)] << ")\n";
  });
  report.provenance = prov;
  write_outputs(report, cfg, out);
  if (report.dof_clamps > 0)
    std::cerr << "warning: " << report.dof_clamps << " predictive dof values clamped to " << cfg.dof_floor << '\n';
  std::cout << render_report(make_results(report));
  std::cerr << "wrote " << out.string() << '\n';
  return 0;
}

int run_stats_cmd(CLI::App* cmd, const RunOptions& o) {
  auto [cfg, prov] = build_config(cmd, o);
  const auto panel = load_panel(cfg.assets_path, cfg.factors_path, cfg.train_len);
  const auto s = run_statistics_only(panel, cfg);
  std::cout << "periods " << s.evaluated << "\nLPD " << s.lpd << "\nAcc " << s.acc << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic risk factor dependency model backtester"};
  app.require_subcommand(1);

  RunOptions bt_opts, st_opts;
  auto* bt = app.add_subcommand("backtest", "run DRFDM and the benchmarks and write reports");
  add_run_options(bt, bt_opts);
  auto* st = app.add_subcommand("stats", "forecast statistics (LPD, Acc) only");
  add_run_options(st, st_opts);

  int n_assets = 50, n_factors = 3, periods = 800, train = 208;
  std::uint64_t seed = 1;
  std::string sim_out = "synthetic";
  auto* sim = app.add_subcommand("simulate", "write a synthetic time-varying sparse factor panel");
  sim->add_option("--n-assets", n_assets)->check(CLI::PositiveNumber);
  sim->add_option("--n-factors", n_factors)->check(CLI::Range(1, 16));
  sim->add_option("--periods", periods)->check(CLI::PositiveNumber);
  sim->add_option("--train", train)->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed);
  sim->add_option("--out", sim_out, "output directory");

  std::string results_path;
  auto* rep = app.add_subcommand("report", "render a results file as a table");
  rep->add_option("results", results_path, "results.jsonl")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*bt) return run_backtest_cmd(bt, bt_opts);
    if (*st) return run_stats_cmd(st, st_opts);
    if (*sim) {
      const auto s = generate_synthetic(default_synthetic_spec(n_assets, n_factors, periods, train, seed));
      fs::create_directories(sim_out);
      save_panel(s.panel, fs::path(sim_out) / "assets.csv", fs::path(sim_out) / "factors.csv");
      write_truth(s.truth, fs::path(sim_out) / "truth.json");
      std::cerr << "wrote " << sim_out << " (" << periods << " x " << n_assets << ", K=" << n_factors << ")\n";
      return 0;
    }
    if (*rep) {
      std::cout << render_report(read_results(results_path));
      return 0;
    }
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
