#include "drfdm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string key) {
  key = trim(key);
  for (auto& c : key) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (c == '-') c = '_';
  }
  while (!key.empty() && key.front() == '_') key.erase(key.begin());
  return key;
}

double to_double(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParameterError("setting '" + key + "': '" + v + "' is not a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ParameterError("setting '" + key + "': '" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  auto s = trim(v);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParameterError("setting '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : to_list(v)) out.push_back(to_double(key, s));
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += f(xs[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& xs) { return join(xs, fmt); }

}  // namespace

void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw) {
  const auto key = normalize_key(raw_key);
  const auto value = trim(raw);
  if (key == "assets") {
    c.assets_path = value;
  } else if (key == "factors") {
    c.factors_path = value;
  } else if (key == "factor_set") {
    c.factor_set = value;
  } else if (key == "train_len") {
    c.train_len = static_cast<int>(to_int(key, value));
  } else if (key == "delta") {
    c.delta_grid = to_doubles(key, value);
  } else if (key == "kappa") {
    c.kappa_grid = to_doubles(key, value);
  } else if (key == "factor_delta") {
    c.factor_delta_grid = to_doubles(key, value);
  } else if (key == "factor_kappa") {
    c.factor_kappa_grid = to_doubles(key, value);
  } else if (key == "alpha") {
    c.alpha = to_double(key, value);
  } else if (key == "alpha_ord") {
    c.alpha_ord = to_double(key, value);
  } else if (key == "ordering") {
    if (value == "learn") {
      c.ordering = OrderingMode::learn;
    } else if (value == "fixed") {
      c.ordering = OrderingMode::fixed;
    } else if (value.rfind("fixed:", 0) == 0) {
      c.ordering = OrderingMode::fixed;
      c.fixed_order.clear();
      for (const auto& s : to_list(value.substr(6)))
        c.fixed_order.push_back(static_cast<int>(to_int(key, s)));
    } else {
      throw ParameterError("setting 'ordering': expected learn, fixed or fixed:i,j,...");
    }
  } else if (key == "fixed_order") {
    c.fixed_order.clear();
    for (const auto& s : to_list(value)) c.fixed_order.push_back(static_cast<int>(to_int(key, s)));
  } else if (key == "ordering_cap") {
    c.ordering_cap = static_cast<int>(to_int(key, value));
  } else if (key == "sparse") {
    c.sparse = to_bool(key, value);
  } else if (key == "dof_floor") {
    c.dof_floor = to_double(key, value);
  } else if (key == "strategy") {
    c.strategy = parse_strategy(value);
  } else if (key == "tau") {
    c.tau_annual = to_double(key, value);
  } else if (key == "bound") {
    c.bound = to_double(key, value);
  } else if (key == "mean_source") {
    if (value == "model") c.mean_source = MeanSource::model;
    else if (value == "momentum") c.mean_source = MeanSource::momentum;
    else throw ParameterError("setting 'mean_source': expected model or momentum");
  } else if (key == "tc") {
    c.tc_bps = to_doubles(key, value);
  } else if (key == "gamma") {
    c.gammas = to_doubles(key, value);
  } else if (key == "charge_entry") {
    c.charge_entry = to_bool(key, value);
  } else if (key == "periods_per_year") {
    c.periods_per_year = static_cast<int>(to_int(key, value));
  } else if (key == "benchmarks") {
    c.benchmarks = to_list(value);
  } else if (key == "reference") {
    c.reference = value;
  } else if (key == "rolling_window") {
    c.rolling_window = static_cast<int>(to_int(key, value));
  } else if (key == "ridge") {
    c.ridge = to_double(key, value);
  } else if (key == "threads") {
    c.threads = static_cast<int>(to_int(key, value));
  } else if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "diagnostics") {
    c.diagnostics = to_bool(key, value);
  } else {
    throw ParameterError("unknown setting '" + raw_key + "'");
  }
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParameterError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ParameterError& e) {
      throw ParameterError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

void validate(const RunConfig& c) {
  auto grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ParameterError(std::string(name) + " grid is empty");
    for (double v : g)
      if (!(v > 0.0 && v <= 1.0))
        throw ParameterError(std::string(name) + " grid value " + fmt(v) + " outside (0, 1]");
  };
  grid(c.delta_grid, "delta");
  grid(c.kappa_grid, "kappa");
  grid(c.factor_delta_grid, "factor_delta");
  grid(c.factor_kappa_grid, "factor_kappa");
  if (!(c.alpha > 0.0 && c.alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(c.alpha_ord > 0.0 && c.alpha_ord <= 1.0)) throw ParameterError("alpha_ord must lie in (0, 1]");
  if (c.tc_bps.empty()) throw ParameterError("tc list is empty");
  for (double v : c.tc_bps)
    if (!(v >= 0.0)) throw ParameterError("transaction costs must be >= 0");
  if (c.gammas.empty()) throw ParameterError("gamma list is empty");
  for (double v : c.gammas)
    if (!(v > 0.0)) throw ParameterError("gamma values must be > 0");
  if (!(c.bound > 0.0)) throw ParameterError("bound must be > 0");
  if (c.periods_per_year < 1) throw ParameterError("periods_per_year must be >= 1");
  if (c.threads < 1) throw ParameterError("threads must be >= 1");
  if (c.rolling_window < 2) throw ParameterError("rolling_window must be >= 2");
  if (c.ordering_cap < 1) throw ParameterError("ordering_cap must be >= 1");
  if (c.dof_floor < 0.0 || (c.dof_floor > 0.0 && c.dof_floor <= 2.0))
    throw ParameterError("dof_floor must be 0 (strict) or > 2");
  if (c.train_len < 0) throw ParameterError("train_len must be >= 0");
}

std::vector<std::pair<std::string, std::string>> describe(const RunConfig& c) {
  auto ints = [](const std::vector<int>& v) { return join(v, [](int i) { return std::to_string(i); }); };
  auto strs = [](const std::vector<std::string>& v) { return join(v, [](const std::string& s) { return s; }); };
  return {
      {"assets", c.assets_path.string()},
      {"factors", c.factors_path.string()},
      {"factor_set", c.factor_set},
      {"train_len", std::to_string(c.train_len)},
      {"delta", join_doubles(c.delta_grid)},
      {"kappa", join_doubles(c.kappa_grid)},
      {"factor_delta", join_doubles(c.factor_delta_grid)},
      {"factor_kappa", join_doubles(c.factor_kappa_grid)},
      {"alpha", fmt(c.alpha)},
      {"alpha_ord", fmt(c.alpha_ord)},
      {"ordering", c.ordering == OrderingMode::learn ? "learn" : "fixed"},
      {"fixed_order", ints(c.fixed_order)},
      {"ordering_cap", std::to_string(c.ordering_cap)},
      {"sparse", c.sparse ? "true" : "false"},
      {"dof_floor", fmt(c.dof_floor)},
      {"strategy", strategy_name(c.strategy)},
      {"tau", fmt(c.tau_annual)},
      {"bound", fmt(c.bound)},
      {"mean_source", c.mean_source == MeanSource::model ? "model" : "momentum"},
      {"tc", join_doubles(c.tc_bps)},
      {"gamma", join_doubles(c.gammas)},
      {"charge_entry", c.charge_entry ? "true" : "false"},
      {"periods_per_year", std::to_string(c.periods_per_year)},
      {"benchmarks", strs(c.benchmarks)},
      {"reference", c.reference},
      {"rolling_window", std::to_string(c.rolling_window)},
      {"ridge", fmt(c.ridge)},
      {"threads", std::to_string(c.threads)},
      {"seed", std::to_string(c.seed)},
      {"out", c.out_dir.string()},
      {"diagnostics", c.diagnostics ? "true" : "false"},
  };
}

}  // namespace drfdm
