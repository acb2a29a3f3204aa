#include "drfdm/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drfdm/config.hpp"
#include "drfdm/error.hpp"

namespace drfdm {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "drfdm-results";

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double get_num(const json& j, const char* key, int line) {
  if (!j.contains(key)) throw FormatError("results line " + std::to_string(line) + ": missing '" + key + "'");
  const auto& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number())
    throw FormatError("results line " + std::to_string(line) + ": '" + key + "' is not a number");
  return v.get<double>();
}

std::string get_str(const json& j, const char* key, int line) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw FormatError("results line " + std::to_string(line) + ": missing string '" + key + "'");
  return j.at(key).get<std::string>();
}

std::string cell(double x, int precision) {
  if (!std::isfinite(x)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << x;
  return os.str();
}

std::string fmt_number(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string pad(const std::string& s, std::size_t width, bool left) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string render_rows(const std::vector<std::string>& head, const std::vector<std::vector<std::string>>& body,
                        std::size_t left_cols) {
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& r : body) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) s += "  ";
      s += pad(r[c], width[c], c < left_cols);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    os << s << '\n';
  };
  line(head);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : body) line(r);
  return os.str();
}

}  // namespace

std::vector<std::string> standard_notes() {
  return {
      "turnover: sum of |w_t - drifted w_{t-1}| per period; first period excluded unless charge_entry",
      "return target: weekly target = annual tau / periods_per_year",
      "fees: annualized bps versus the reference model, both series net of transaction costs",
      "mean, sd, sr: annualized from per-period net returns",
      "acc: percent of correctly signed mean forecasts, zero counted as negative",
  };
}

ResultsFile make_results(const BacktestReport& report) {
  ResultsFile out;
  out.provenance = report.provenance;
  out.notes = standard_notes();
  out.rows = report.rows;
  return out;
}

std::string serialize_results(const ResultsFile& r) {
  json head;
  head["format"] = kFormat;
  head["version"] = r.version;
  json prov = json::array();
  for (const auto& [k, v] : r.provenance) prov.push_back({k, v});
  head["provenance"] = prov;
  head["notes"] = r.notes;
  std::string out = head.dump() + '\n';
  for (const auto& row : r.rows) {
    json j;
    j["model"] = row.model;
    j["strategy"] = row.strategy;
    j["tc_bps"] = num(row.tc_bps);
    j["turnover"] = num(row.turnover);
    j["mean"] = num(row.mean);
    j["sd"] = num(row.sd);
    j["sr"] = num(row.sr);
    j["lpd"] = num(row.lpd);
    j["moment_lpd"] = num(row.moment_lpd);
    j["acc"] = num(row.acc);
    json fees = json::array();
    for (const auto& [g, phi] : row.fees) fees.push_back({{"gamma", num(g)}, {"phi", num(phi)}});
    j["fees"] = fees;
    out += j.dump() + '\n';
  }
  return out;
}

ResultsFile parse_results(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  ResultsFile out;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError("results line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError("results line " + std::to_string(lineno) + ": expected an object");
    try {
      if (!have_header) {
        if (get_str(j, "format", lineno) != kFormat)
          throw FormatError("not a results file (format tag '" + j.at("format").get<std::string>() + "')");
        out.version = j.at("version").get<int>();
        if (out.version != kResultsVersion)
          throw FormatError("unsupported results version " + std::to_string(out.version));
        for (const auto& p : j.value("provenance", json::array()))
          out.provenance.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        out.notes = j.value("notes", std::vector<std::string>{});
        have_header = true;
        continue;
      }
      ReportRow row;
      row.model = get_str(j, "model", lineno);
      row.strategy = get_str(j, "strategy", lineno);
      row.tc_bps = get_num(j, "tc_bps", lineno);
      row.turnover = get_num(j, "turnover", lineno);
      row.mean = get_num(j, "mean", lineno);
      row.sd = get_num(j, "sd", lineno);
      row.sr = get_num(j, "sr", lineno);
      row.lpd = get_num(j, "lpd", lineno);
      row.moment_lpd = get_num(j, "moment_lpd", lineno);
      row.acc = get_num(j, "acc", lineno);
      for (const auto& f : j.value("fees", json::array()))
        row.fees[get_num(f, "gamma", lineno)] = get_num(f, "phi", lineno);
      out.rows.push_back(std::move(row));
    } catch (const json::exception& e) {
      throw FormatError("results line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw FormatError("results file is empty");
  return out;
}

void write_results(const ResultsFile& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize_results(results);
}

ResultsFile read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open results file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_results(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string render_report(const ResultsFile& r) {
  std::vector<double> tcs;
  std::set<double> gammas;
  for (const auto& row : r.rows) {
    if (std::find(tcs.begin(), tcs.end(), row.tc_bps) == tcs.end()) tcs.push_back(row.tc_bps);
    for (const auto& [g, phi] : row.fees) gammas.insert(g);
  }
  std::ostringstream os;
  for (const auto& [k, v] : r.provenance)
    if (k == "strategy" || k == "reference" || k == "tau") os << "# " << k << " = " << v << '\n';
  if (!r.provenance.empty()) os << '\n';

  for (std::size_t b = 0; b < tcs.size(); ++b) {
    if (b) os << '\n';
    os << "TC = " << fmt_number(tcs[b]) << " bps\n";
    std::vector<std::string> head{"Model", "Strategy", "Turnover", "Mean", "SD", "SR"};
    for (double g : gammas) head.push_back("Phi(g=" + fmt_number(g) + ")");
    std::vector<std::vector<std::string>> body;
    for (const auto& row : r.rows) {
      if (row.tc_bps != tcs[b]) continue;
      std::vector<std::string> cells{row.model, row.strategy, cell(row.turnover, 4), cell(row.mean, 4),
                                     cell(row.sd, 4), cell(row.sr, 2)};
      for (double g : gammas) {
        const auto it = row.fees.find(g);
        cells.push_back(it == row.fees.end() ? "-" : cell(it->second, 1));
      }
      body.push_back(std::move(cells));
    }
    os << render_rows(head, body, 2);
  }

  if (!tcs.empty()) {
    os << "\nForecast statistics\n";
    std::vector<std::vector<std::string>> body;
    for (const auto& row : r.rows)
      if (row.tc_bps == tcs.front())
        body.push_back({row.model, cell(row.lpd, 1), cell(row.moment_lpd, 1), cell(row.acc, 2)});
    os << render_rows({"Model", "LPD", "Gaussian LPD", "Acc"}, body, 1);
  }
  return os.str();
}

void write_outputs(const BacktestReport& rep, const RunConfig& config, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto results = make_results(rep);
  write_results(results, dir / "results.jsonl");
  {
    std::ofstream out(dir / "report.txt");
    if (!out) throw DataError("cannot write " + (dir / "report.txt").string());
    out << render_report(results);
  }
  if (rep.runs.empty()) return;
  const auto& dates = rep.runs.front().dates;
  if (dates.empty()) return;

  std::vector<std::string> names;
  MatrixXd gross(static_cast<Eigen::Index>(dates.size()), static_cast<Eigen::Index>(rep.runs.size()));
  for (std::size_t m = 0; m < rep.runs.size(); ++m) {
    names.push_back(rep.runs[m].name);
    gross.col(static_cast<Eigen::Index>(m)) = rep.runs[m].gross;
  }
  write_table(dir / "gross_returns.csv", "date", names, dates, gross);
  write_table(dir / "inclusion.csv", "date", rep.factor_names, dates, rep.inclusion);
  write_table(dir / "ordering_probs.csv", "date", rep.ordering_labels, dates, rep.ordering_probs);

  for (const auto& run : rep.runs)
    write_table(dir / ("weights_" + run.name + ".csv"), "date", rep.asset_names, run.dates, run.weights);
  std::ofstream cfg(dir / "config.used");
  for (const auto& [k, v] : describe(config)) cfg << k << " = " << v << '\n';
}

}  // namespace drfdm
