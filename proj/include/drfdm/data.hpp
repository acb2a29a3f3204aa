#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drfdm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Aligned asset and factor returns sharing one date index.
///
/// Rows are periods, oldest first. `returns` is T x N, `factors` is T x K.
/// The first `train_len` rows are used only to warm up the filters.
struct ReturnPanel {
  std::vector<std::string> dates;
  std::vector<std::string> asset_names;
  std::vector<std::string> factor_names;
  MatrixXd returns;
  MatrixXd factors;
  int train_len = 0;

  int periods() const { return static_cast<int>(returns.rows()); }
  int n_assets() const { return static_cast<int>(returns.cols()); }
  int n_factors() const { return static_cast<int>(factors.cols()); }

  /// Throws ShapeError / ParameterError when the invariants do not hold.
  void validate() const;

  /// Copy restricted to the given factor columns (in the given order).
  ReturnPanel with_factors(const std::vector<int>& columns) const;
};

/// One parsed delimited-text table: header, first-column labels, numeric body.
struct Table {
  std::vector<std::string> header;  // excludes the date column name
  std::vector<std::string> labels;
  MatrixXd values;
};

/// RFC-4180 style CSV with a header row and a leading date column.
Table read_table(const std::filesystem::path& path);
void write_table(const std::filesystem::path& path, const std::string& label_name,
                 const std::vector<std::string>& header,
                 const std::vector<std::string>& labels, const MatrixXd& values);

/// Inner-joins two tables on their date labels and sorts dates ascending.
/// `train_len` <= 0 selects T/4 (clamped to [1, T-1]).
ReturnPanel align_panel(const Table& assets, const Table& factors, int train_len = 0);

ReturnPanel load_panel(const std::filesystem::path& asset_path,
                       const std::filesystem::path& factor_path, int train_len = 0);

void save_panel(const ReturnPanel& panel, const std::filesystem::path& asset_path,
                const std::filesystem::path& factor_path);

// --- synthetic panels --------------------------------------------------------

/// Periods [begin, end) during which a loading is forced to exactly zero.
struct ZeroSegment {
  int begin = 0;
  int end = 0;
};

/// Path of a single loading: starts at `base`, optionally follows a Gaussian
/// random walk with step sd `walk_sd`, and is zero inside `zeros`.
struct LoadingPath {
  double base = 0.0;
  double walk_sd = 0.0;
  std::vector<ZeroSegment> zeros;
};

struct SyntheticSpec {
  int n_assets = 0;
  int n_factors = 0;
  int periods = 0;
  int train_len = 0;
  /// n_assets x n_factors paths, row-major by asset.
  std::vector<std::vector<LoadingPath>> loadings;
  VectorXd alpha;        // per-asset intercept (empty -> zeros)
  VectorXd factor_mean;  // empty -> zeros
  MatrixXd factor_cov;
  VectorXd idio_var;
  std::uint64_t seed = 0;
};

/// Ground truth used to generate a synthetic panel.
struct SyntheticTruth {
  std::vector<MatrixXd> loadings;  // per period, N x K
  VectorXd alpha;
  MatrixXd factor_cov;
  VectorXd idio_var;
};

struct SyntheticPanel {
  ReturnPanel panel;
  SyntheticTruth truth;
};

/// Draws r_t = alpha + B_t f_t + eps_t with f_t ~ N(mu, factor_cov) and
/// diagonal Gaussian eps_t. Bit-identical for identical specs.
SyntheticPanel generate_synthetic(const SyntheticSpec& spec);

/// Time-varying sparse factor model used by `simulate` and the end-to-end
/// checks. Factor 0 is a market-like factor every asset loads on; every other
/// factor is switched off for a random stretch of the sample in half of the
/// assets, and all loadings drift as slow random walks.
SyntheticSpec default_synthetic_spec(int n_assets, int n_factors, int periods,
                                     int train_len, std::uint64_t seed);

/// JSON sidecar with the truth record (dimensions, alpha, idio_var,
/// factor_cov and the per-period loading matrices).
void write_truth(const SyntheticTruth& truth, const std::filesystem::path& path);
SyntheticTruth read_truth(const std::filesystem::path& path);

}  // namespace drfdm
