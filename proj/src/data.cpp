#include "drfdm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

std::vector<std::vector<std::string>> parse_csv(std::istream& in,
                                                const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw FormatError(source + ": stray quote in row " + std::to_string(rows.size() + 1));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw FormatError(source + ": unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

// Quote a field when it contains a delimiter, a quote or a line break.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto source = path.string();
  auto rows = parse_csv(in, source);
  if (rows.empty()) throw FormatError(source + ": empty file");

  Table table;
  const auto& head = rows.front();
  if (head.size() < 2) throw FormatError(source + ": header needs a date column and at least one series");
  for (std::size_t j = 1; j < head.size(); ++j) table.header.push_back(trim(head[j]));

  const auto width = head.size();
  std::vector<std::vector<double>> body;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != width)
      throw FormatError(source + ": row " + std::to_string(i + 1) + " has " +
                        std::to_string(r.size()) + " fields, expected " +
                        std::to_string(width));
    std::vector<double> values(width - 1);
    bool missing = false;
    for (std::size_t j = 1; j < width; ++j) {
      const auto cell = trim(r[j]);
      if (is_missing(cell)) {
        missing = true;
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      const char* last = first + cell.size();
      if (*first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw FormatError(source + ": unparsable number '" + cell + "' at row " +
                          std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                          " (" + table.header[j - 1] + ")");
      values[j - 1] = v;
    }
    if (missing) continue;  // incomplete rows are dropped, never imputed
    table.labels.push_back(trim(r[0]));
    body.push_back(std::move(values));
  }

  table.values.resize(static_cast<Eigen::Index>(body.size()),
                      static_cast<Eigen::Index>(width - 1));
  for (std::size_t i = 0; i < body.size(); ++i)
    for (std::size_t j = 0; j + 1 < width; ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = body[i][j];
  return table;
}

void write_table(const std::filesystem::path& path, const std::string& label_name,
                 const std::vector<std::string>& header,
                 const std::vector<std::string>& labels, const MatrixXd& values) {
  if (static_cast<Eigen::Index>(labels.size()) != values.rows() ||
      static_cast<Eigen::Index>(header.size()) != values.cols())
    throw ShapeError("write_table: labels/header do not match matrix shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << csv_field(label_name);
  for (const auto& h : header) out << ',' << csv_field(h);
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << csv_field(labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      // shortest representation that round-trips exactly
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, values(i, j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

void ReturnPanel::validate() const {
  const auto t = returns.rows();
  if (factors.rows() != t || static_cast<Eigen::Index>(dates.size()) != t)
    throw ShapeError("panel: returns, factors and dates must share the row count");
  if (static_cast<Eigen::Index>(asset_names.size()) != returns.cols() ||
      static_cast<Eigen::Index>(factor_names.size()) != factors.cols())
    throw ShapeError("panel: column names do not match matrix widths");
  if (!(train_len > 0 && train_len < t))
    throw ParameterError("panel: train_len must satisfy 0 < train_len < T (got " +
                         std::to_string(train_len) + ", T=" + std::to_string(t) + ")");
  if (!returns.allFinite() || !factors.allFinite())
    throw IntegrityError("panel: non-finite values");
}

ReturnPanel ReturnPanel::with_factors(const std::vector<int>& columns) const {
  ReturnPanel out = *this;
  out.factors.resize(factors.rows(), static_cast<Eigen::Index>(columns.size()));
  out.factor_names.clear();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const int c = columns[j];
    if (c < 0 || c >= n_factors())
      throw ParameterError("factor column " + std::to_string(c) + " out of range");
    out.factors.col(static_cast<Eigen::Index>(j)) = factors.col(c);
    out.factor_names.push_back(factor_names[static_cast<std::size_t>(c)]);
  }
  return out;
}

ReturnPanel align_panel(const Table& assets, const Table& factors, int train_len) {
  auto index_of = [](const Table& t, const char* what) {
    std::map<std::string, Eigen::Index> idx;
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
      if (!idx.emplace(t.labels[i], static_cast<Eigen::Index>(i)).second)
        throw IntegrityError(std::string("duplicate date '") + t.labels[i] + "' in " + what +
                             " file");
    }
    return idx;
  };
  const auto a_idx = index_of(assets, "asset");
  const auto f_idx = index_of(factors, "factor");

  std::vector<std::string> dates;
  for (const auto& [d, _] : a_idx)
    if (f_idx.count(d)) dates.push_back(d);  // std::map keeps them sorted
  if (dates.empty()) throw AlignmentError("asset and factor files share no dates");

  ReturnPanel p;
  p.dates = dates;
  p.asset_names = assets.header;
  p.factor_names = factors.header;
  const auto t = static_cast<Eigen::Index>(dates.size());
  p.returns.resize(t, assets.values.cols());
  p.factors.resize(t, factors.values.cols());
  for (Eigen::Index i = 0; i < t; ++i) {
    p.returns.row(i) = assets.values.row(a_idx.at(dates[static_cast<std::size_t>(i)]));
    p.factors.row(i) = factors.values.row(f_idx.at(dates[static_cast<std::size_t>(i)]));
  }
  if (train_len <= 0)
    train_len = std::clamp(static_cast<int>(t) / 4, 1, std::max(1, static_cast<int>(t) - 1));
  p.train_len = train_len;
  return p;
}

ReturnPanel load_panel(const std::filesystem::path& asset_path,
                       const std::filesystem::path& factor_path, int train_len) {
  return align_panel(read_table(asset_path), read_table(factor_path), train_len);
}

void save_panel(const ReturnPanel& panel, const std::filesystem::path& asset_path,
                const std::filesystem::path& factor_path) {
  write_table(asset_path, "date", panel.asset_names, panel.dates, panel.returns);
  write_table(factor_path, "date", panel.factor_names, panel.dates, panel.factors);
}

SyntheticPanel generate_synthetic(const SyntheticSpec& spec) {
  const int n = spec.n_assets, k = spec.n_factors, t = spec.periods;
  if (n < 1 || k < 0 || t < 2) throw ParameterError("synthetic: need N >= 1, K >= 0, T >= 2");
  if (spec.factor_cov.rows() != k || spec.factor_cov.cols() != k)
    throw ParameterError("synthetic: factor_cov must be K x K");
  if (spec.idio_var.size() != n || (spec.idio_var.array() <= 0.0).any())
    throw ParameterError("synthetic: idio_var must be N strictly positive values");
  if (static_cast<int>(spec.loadings.size()) != n)
    throw ParameterError("synthetic: loadings must have N rows");
  for (const auto& row : spec.loadings)
    if (static_cast<int>(row.size()) != k)
      throw ParameterError("synthetic: each loading row must have K paths");

  Eigen::MatrixXd chol_f = Eigen::MatrixXd::Zero(k, k);
  if (k > 0) {
    if ((spec.factor_cov - spec.factor_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ParameterError("synthetic: factor_cov is not symmetric");
    Eigen::LLT<MatrixXd> llt(spec.factor_cov);
    if (llt.info() != Eigen::Success)
      throw ParameterError("synthetic: factor_cov is not positive definite");
    chol_f = llt.matrixL();
  }
  const VectorXd alpha = spec.alpha.size() ? spec.alpha : VectorXd::Zero(n);
  const VectorXd mu = spec.factor_mean.size() ? spec.factor_mean : VectorXd::Zero(k);
  if (alpha.size() != n || mu.size() != k)
    throw ParameterError("synthetic: alpha/factor_mean dimension mismatch");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);

  SyntheticPanel out;
  auto& p = out.panel;
  p.returns.resize(t, n);
  p.factors.resize(t, k);
  p.train_len = spec.train_len > 0 ? spec.train_len : std::max(1, t / 4);
  for (int i = 0; i < t; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%05d", i);
    p.dates.emplace_back(buf);
  }
  for (int j = 0; j < n; ++j) p.asset_names.push_back("A" + std::to_string(j));
  for (int j = 0; j < k; ++j) p.factor_names.push_back("F" + std::to_string(j));

  MatrixXd level(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) level(i, j) = spec.loadings[i][j].base;

  const VectorXd idio_sd = spec.idio_var.cwiseSqrt();
  VectorXd draw(std::max(k, 1));
  for (int s = 0; s < t; ++s) {
    MatrixXd b(n, k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j) {
        const auto& path = spec.loadings[i][j];
        if (s > 0 && path.walk_sd > 0.0) level(i, j) += path.walk_sd * z(rng);
        bool off = false;
        for (const auto& seg : path.zeros) off = off || (s >= seg.begin && s < seg.end);
        b(i, j) = off ? 0.0 : level(i, j);
      }
    }
    for (int j = 0; j < k; ++j) draw(j) = z(rng);
    const VectorXd f = mu + chol_f * draw.head(k);
    p.factors.row(s) = f.transpose();
    for (int i = 0; i < n; ++i) {
      const double eps = idio_sd(i) * z(rng);
      p.returns(s, i) = alpha(i) + b.row(i).dot(f) + eps;
    }
    out.truth.loadings.push_back(std::move(b));
  }
  out.truth.alpha = alpha;
  out.truth.factor_cov = spec.factor_cov;
  out.truth.idio_var = spec.idio_var;
  return out;
}

SyntheticSpec default_synthetic_spec(int n_assets, int n_factors, int periods,
                                     int train_len, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_assets = n_assets;
  spec.n_factors = n_factors;
  spec.periods = periods;
  spec.train_len = train_len;
  spec.seed = seed;

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  // Weekly scale: market sd ~2.5%, style factors ~1.2%, idiosyncratic ~3%.
  spec.factor_cov = MatrixXd::Zero(n_factors, n_factors);
  for (int j = 0; j < n_factors; ++j)
    spec.factor_cov(j, j) = j == 0 ? 6.25e-4 : 1.44e-4;
  for (int i = 1; i < n_factors; ++i)
    for (int j = i + 1; j < n_factors; ++j)
      spec.factor_cov(i, j) = spec.factor_cov(j, i) = 0.2 * 1.44e-4;
  if (n_factors > 1)
    for (int j = 1; j < n_factors; ++j)
      spec.factor_cov(0, j) = spec.factor_cov(j, 0) = -0.1 * 2.5e-2 * 1.2e-2;
  spec.factor_mean = VectorXd::Constant(n_factors, 1e-3);
  spec.idio_var = VectorXd(n_assets);
  spec.alpha = VectorXd::Zero(n_assets);

  spec.loadings.assign(static_cast<std::size_t>(n_assets),
                       std::vector<LoadingPath>(static_cast<std::size_t>(n_factors)));
  for (int i = 0; i < n_assets; ++i) {
    spec.idio_var(i) = std::pow(0.02 + 0.02 * u(rng), 2);
    for (int j = 0; j < n_factors; ++j) {
      auto& path = spec.loadings[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (j == 0) {
        path.base = 0.6 + 0.8 * u(rng);
        path.walk_sd = 0.01;
        continue;
      }
      path.base = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * u(rng));
      path.walk_sd = 0.01;
      if ((i + j) % 2 == 0) {
        const int len = periods / 4 + static_cast<int>(u(rng) * periods / 2);
        const int begin = static_cast<int>(u(rng) * (periods - len));
        path.zeros.push_back({begin, begin + len});
      }
    }
  }
  return spec;
}

void write_truth(const SyntheticTruth& truth, const std::filesystem::path& path) {
  using nlohmann::json;
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto mat = [](const MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(m(i, j));
    return rows;
  };
  json j;
  j["format"] = "drfdm-synthetic-truth";
  j["version"] = 1;
  j["n_assets"] = truth.alpha.size();
  j["n_factors"] = truth.factor_cov.rows();
  j["periods"] = truth.loadings.size();
  j["alpha"] = vec(truth.alpha);
  j["idio_var"] = vec(truth.idio_var);
  j["factor_cov"] = mat(truth.factor_cov);
  j["loadings"] = json::array();
  for (const auto& b : truth.loadings) j["loadings"].push_back(mat(b));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

SyntheticTruth read_truth(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  auto vec = [](const json& a) {
    VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
  };
  auto mat = [](const json& a, Eigen::Index cols) {
    MatrixXd m(static_cast<Eigen::Index>(a.size()), cols);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (Eigen::Index c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(i), c) = a[i][static_cast<std::size_t>(c)].get<double>();
    return m;
  };
  try {
    SyntheticTruth t;
    const auto k = j.at("n_factors").get<Eigen::Index>();
    t.alpha = vec(j.at("alpha"));
    t.idio_var = vec(j.at("idio_var"));
    t.factor_cov = mat(j.at("factor_cov"), k);
    for (const auto& b : j.at("loadings")) t.loadings.push_back(mat(b, k));
    return t;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace drfdm
