#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "drfdm/engine.hpp"

namespace drfdm {

inline constexpr int kResultsVersion = 1;

/// Contents of a results file: one header record followed by one record
/// per (model, strategy, TC) row.
struct ResultsFile {
  int version = kResultsVersion;
  std::vector<std::pair<std::string, std::string>> provenance;
  std::vector<std::string> notes;
  std::vector<ReportRow> rows;
};

/// Conventions recorded in every results header.
std::vector<std::string> standard_notes();

ResultsFile make_results(const BacktestReport& report);

/// Line-delimited JSON: the first line is the header
/// {"format":"drfdm-results","version":1,...}, then one object per row.
/// Non-finite numbers are written as null.
std::string serialize_results(const ResultsFile& results);

/// Inverse of serialize_results. Throws FormatError on malformed input or an
/// unsupported version.
ResultsFile parse_results(const std::string& text);

void write_results(const ResultsFile& results, const std::filesystem::path& path);
ResultsFile read_results(const std::filesystem::path& path);

/// Aligned text table, one block per TC setting. Each block has one line per
/// model/strategy with Turnover, Mean, SD, SR and one fee column per gamma,
/// followed by the forecast statistics (LPD, Acc).
std::string render_report(const ResultsFile& results);

/// Writes results.jsonl, report.txt and the per-date series (weights, net
/// returns, inclusion and ordering probabilities) as CSV under `dir`.
void write_outputs(const BacktestReport& report, const RunConfig& config,
                   const std::filesystem::path& dir);

}  // namespace drfdm
