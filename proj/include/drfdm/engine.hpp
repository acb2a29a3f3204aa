#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "drfdm/benchmarks.hpp"
#include "drfdm/data.hpp"
#include "drfdm/ordering.hpp"
#include "drfdm/portfolio.hpp"
#include "drfdm/recouple.hpp"
#include "drfdm/selection.hpp"

namespace drfdm {

enum class Strategy { mvp, gmv, mvp_box, gmv_box };
enum class OrderingMode { learn, fixed };
enum class MeanSource { model, momentum };

struct RunConfig {
  // data
  std::filesystem::path assets_path;
  std::filesystem::path factors_path;
  std::string factor_set;  // empty = all columns; "3F".."6F" or a comma list
  int train_len = 0;       // 0 = keep the panel's value

  // model space
  std::vector<double> delta_grid{0.998, 0.999, 1.0};
  std::vector<double> kappa_grid{0.99, 0.995, 1.0};         // asset volatility
  std::vector<double> factor_delta_grid{0.998, 0.999, 1.0};
  std::vector<double> factor_kappa_grid{0.999, 1.0};         // factor volatility
  double alpha = 0.99;
  double alpha_ord = 0.99;
  OrderingMode ordering = OrderingMode::learn;
  Permutation fixed_order;  // empty = identity
  int ordering_cap = kDefaultOrderingCap;
  bool sparse = true;  // false = always load on every factor
  double dof_floor = 2.05;

  // portfolio
  Strategy strategy = Strategy::mvp;
  double tau_annual = 0.10;  // weekly target = tau_annual / periods_per_year
  double bound = 0.05;
  MeanSource mean_source = MeanSource::model;
  std::vector<double> tc_bps{5.0};
  std::vector<double> gammas{10.0};
  bool charge_entry = false;
  int periods_per_year = 52;

  // benchmarks
  std::vector<std::string> benchmarks;
  std::string reference = "wdlm";
  int rolling_window = 208;
  double ridge = 1e-8;

  // execution / output
  int threads = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  bool diagnostics = false;
};

/// Per-date output of one strategy run.
struct ModelRun {
  std::string name;
  std::vector<std::string> dates;  // evaluation dates
  MatrixXd weights;                // E x N
  MatrixXd mean_forecasts;         // E x N
  VectorXd gross;                  // E
  double lpd = 0.0;                // native predictive log density (NaN if none)
  double moment_lpd = 0.0;         // Gaussian log density from (mean, cov)
  double acc = 0.0;
  double realized_variance = 0.0;  // sample variance of gross returns
};

struct ReportRow {
  std::string model;
  std::string strategy;
  double tc_bps = 0.0;
  double turnover = 0.0;  // mean weekly
  double mean = 0.0;
  double sd = 0.0;
  double sr = 0.0;
  double lpd = 0.0;
  double moment_lpd = 0.0;
  double acc = 0.0;
  std::map<double, double> fees;  // gamma -> Phi (bps/yr) vs reference; NaN when unavailable
};

struct BacktestReport {
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<ModelRun> runs;
  std::vector<ReportRow> rows;
  std::vector<std::string> asset_names;
  std::vector<std::string> factor_names;
  MatrixXd inclusion;  // E x K, cross-sectional mean inclusion probability
  std::vector<std::string> ordering_labels;
  MatrixXd ordering_probs;  // E x (#orderings)
  int dof_clamps = 0;
};

struct StatisticsReport {
  double lpd = 0.0;
  double acc = 0.0;
  double moment_lpd = 0.0;
  int evaluated = 0;
};

/// Everything the sequential DRFDM filter exposes per evaluated date.
struct StepRecord {
  int t = 0;
  PredictiveMoments moments;
  std::vector<std::size_t> selected;  // per asset, index into its pool
  std::vector<ParentMask> masks;
  double lpd = 0.0;
  VectorXd inclusion;  // K, cross-sectional average after the update
  std::vector<double> ordering_log_probs;
};

/// Sequential DRFDM filter over a panel. Owns all equation pools and
/// orderings; `step(t)` forecasts row t from rows < t and then assimilates
/// row t.
class DrfdmFilter {
 public:
  DrfdmFilter(const ReturnPanel& panel, const RunConfig& config);

  /// Moments for row t using information through t - 1 (no state change).
  PredictiveMoments forecast(std::vector<EquationSelection>* selections = nullptr,
                             std::vector<std::size_t>* selected = nullptr);

  /// Assimilates row t; returns the asset-block LPD of the models that were
  /// selected before the update.
  double assimilate(int t);

  const std::vector<EquationPool>& asset_pools() const { return assets_; }
  const std::vector<OrderingState>& orderings() const { return orderings_; }
  int dof_clamps() const { return clamps_; }
  VectorXd mean_inclusion() const;

 private:
  const ReturnPanel& panel_;
  const RunConfig& config_;
  std::vector<EquationPool> assets_;
  std::vector<OrderingState> orderings_;
  int clamps_ = 0;
};

/// Calls fn(i) for i in [0, n) on up to `threads` workers, statically
/// partitioned in index order.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Restricts the panel to the configured factor set and training length.
ReturnPanel prepare_panel(const ReturnPanel& panel, const RunConfig& config);

/// Factor columns selected by a factor-set spec ("", "3F".."6F", or names /
/// indices separated by commas).
std::vector<int> resolve_factor_set(const std::string& spec,
                                    const std::vector<std::string>& names);

/// Optional per-step observer (used by diagnostics dumps and tests).
using StepObserver = std::function<void(const StepRecord&)>;

BacktestReport run_backtest(const ReturnPanel& panel, const RunConfig& config,
                            const StepObserver& observer = {});

StatisticsReport run_statistics_only(const ReturnPanel& panel, const RunConfig& config);

std::string strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);

}  // namespace drfdm
