#include "drfdm/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <thread>

#include "drfdm/error.hpp"

namespace drfdm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Rethrows with the same category and a context prefix.
template <typename Fn>
auto with_context(const std::string& ctx, Fn&& fn) {
  try {
    return fn();
  } catch (const MomentError& e) {
    throw MomentError(ctx + ": " + e.what());
  } catch (const DegeneracyError& e) {
    throw DegeneracyError(ctx + ": " + e.what());
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(ctx + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const WindowError& e) {
    throw WindowError(ctx + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(ctx + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + ": " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError(ctx + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(ctx + ": " + e.what());
  }
}

double gaussian_log_density(const VectorXd& mean, const MatrixXd& cov, const VectorXd& y) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("predictive covariance is not PD");
  const MatrixXd& l = llt.matrixLLT();
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const double maha = llt.matrixL().solve(y - mean).squaredNorm();
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) + logdet + maha);
}

VectorXd strategy_weights(const RunConfig& cfg, const VectorXd& mean, const MatrixXd& cov) {
  const double tau = cfg.tau_annual / cfg.periods_per_year;
  switch (cfg.strategy) {
    case Strategy::mvp:
      return mvp_weights(mean, cov, tau);
    case Strategy::gmv:
      return gmv_weights(cov);
    case Strategy::mvp_box:
      return constrained_weights(mean, cov, tau, cfg.bound);
    case Strategy::gmv_box:
      return constrained_weights(std::nullopt, cov, std::nullopt, cfg.bound);
  }
  return {};
}

int sign_hits(const VectorXd& forecast, const Eigen::Ref<const VectorXd>& realized) {
  int hits = 0;
  for (Eigen::Index j = 0; j < forecast.size(); ++j)
    hits += (forecast(j) > 0.0) == (realized(j) > 0.0);
  return hits;
}

std::string ordering_label(const Permutation& perm, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (i) out += '>';
    out += names[static_cast<std::size_t>(perm[i])];
  }
  return out;
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::mvp:
      return "mvp";
    case Strategy::gmv:
      return "gmv";
    case Strategy::mvp_box:
      return "mvp-box";
    case Strategy::gmv_box:
      return "gmv-box";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  const auto v = lower(s);
  if (v == "mvp") return Strategy::mvp;
  if (v == "gmv") return Strategy::gmv;
  if (v == "mvp-box" || v == "constrained" || v == "mvp_box") return Strategy::mvp_box;
  if (v == "gmv-box" || v == "gmv_box") return Strategy::gmv_box;
  throw ParameterError("unknown strategy '" + s + "' (expected mvp, gmv, mvp-box or gmv-box)");
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<int> resolve_factor_set(const std::string& spec,
                                    const std::vector<std::string>& names) {
  const int k = static_cast<int>(names.size());
  std::vector<int> all(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) all[static_cast<std::size_t>(i)] = i;
  if (spec.empty() || lower(spec) == "all") return all;

  auto find = [&](const std::vector<std::string>& aliases) -> int {
    for (int i = 0; i < k; ++i)
      for (const auto& a : aliases)
        if (lower(names[static_cast<std::size_t>(i)]) == a) return i;
    return -1;
  };
  const std::map<std::string, std::vector<std::string>> aliases{
      {"MKT", {"mkt", "mkt-rf", "mkt_rf", "mktrf", "market"}},
      {"SMB", {"smb"}},
      {"HML", {"hml"}},
      {"RMW", {"rmw"}},
      {"CMA", {"cma"}},
      {"MOM", {"mom", "umd", "wml"}}};
  const std::map<std::string, std::vector<std::string>> presets{
      {"3f", {"MKT", "SMB", "HML"}},
      {"4f", {"MKT", "SMB", "HML", "MOM"}},
      {"5f", {"MKT", "SMB", "HML", "RMW", "CMA"}},
      {"6f", {"MKT", "SMB", "HML", "RMW", "CMA", "MOM"}}};
  if (auto it = presets.find(lower(spec)); it != presets.end()) {
    std::vector<int> out;
    for (const auto& f : it->second) {
      const int idx = find(aliases.at(f));
      if (idx < 0) break;
      out.push_back(idx);
    }
    if (out.size() == it->second.size()) return out;
    // Unnamed columns: take the first k.
    const int want = static_cast<int>(it->second.size());
    if (want > k)
      throw ParameterError("factor set " + spec + " needs " + std::to_string(want) +
                           " factors, panel has " + std::to_string(k));
    return {all.begin(), all.begin() + want};
  }
  std::vector<int> out;
  std::set<int> seen;
  for (const auto& tok : split(spec, ',')) {
    if (tok.empty()) continue;
    int idx = find({lower(tok)});
    if (idx < 0 && std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      idx = std::stoi(tok);
    if (idx < 0 || idx >= k) throw ParameterError("unknown factor '" + tok + "' in factor set");
    if (!seen.insert(idx).second) throw ParameterError("factor '" + tok + "' listed twice");
    out.push_back(idx);
  }
  if (out.empty()) throw ParameterError("empty factor set");
  return out;
}

ReturnPanel prepare_panel(const ReturnPanel& panel, const RunConfig& config) {
  ReturnPanel out = panel.with_factors(resolve_factor_set(config.factor_set, panel.factor_names));
  if (config.train_len > 0) out.train_len = config.train_len;
  out.validate();
  if (out.n_factors() < 1) throw ParameterError("at least one factor is required");
  if (out.train_len < 2) throw ParameterError("training period must cover at least 2 rows");
  return out;
}

// ---------------------------------------------------------------------------

DrfdmFilter::DrfdmFilter(const ReturnPanel& panel, const RunConfig& config)
    : panel_(panel), config_(config) {
  const int k = panel.n_factors();
  const int n = panel.n_assets();
  const int train = panel.train_len;
  if (k < 1) throw ParameterError("DRFDM needs at least one factor");

  PoolOptions asset_opts{config.delta_grid, config.kappa_grid, config.alpha};
  PoolOptions factor_opts{config.factor_delta_grid, config.factor_kappa_grid, config.alpha};
  const MatrixXd f_train = panel.factors.topRows(train);

  assets_.resize(static_cast<std::size_t>(n));
  parallel_for(n, config.threads, [&](int i) {
    const double s0 = ols_residual_variance(f_train, panel.returns.col(i).head(train));
    assets_[static_cast<std::size_t>(i)] =
        config.sparse ? build_asset_pool(k, asset_opts, s0) : build_factor_pool(k, asset_opts, s0);
  });

  std::vector<Permutation> perms;
  if (config.ordering == OrderingMode::learn) {
    perms = enumerate_orderings(k, config.ordering_cap);
  } else {
    Permutation p = config.fixed_order;
    if (p.empty())
      for (int i = 0; i < k; ++i) p.push_back(i);
    Permutation sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < static_cast<int>(sorted.size()); ++i)
      if (sorted[static_cast<std::size_t>(i)] != i || static_cast<int>(p.size()) != k)
        throw ParameterError("fixed ordering is not a permutation of the " + std::to_string(k) +
                             " factors");
    perms.push_back(p);
  }
  const double uniform = -std::log(static_cast<double>(perms.size()));
  orderings_.resize(perms.size());
  parallel_for(static_cast<int>(perms.size()), config.threads, [&](int o) {
    auto& st = orderings_[static_cast<std::size_t>(o)];
    st.perm = perms[static_cast<std::size_t>(o)];
    st.log_prob = uniform;
    MatrixXd parents(train, 0);
    for (int p = 0; p < k; ++p) {
      const int col = st.perm[static_cast<std::size_t>(p)];
      const double s0 = ols_residual_variance(parents, f_train.col(col));
      st.factor_pools.push_back(build_factor_pool(p, factor_opts, s0));
      parents.conservativeResize(Eigen::NoChange, p + 1);
      parents.col(p) = f_train.col(col);
    }
  });
}

PredictiveMoments DrfdmFilter::forecast(std::vector<EquationSelection>* selections,
                                        std::vector<std::size_t>* selected) {
  const MomentOptions opts{config_.dof_floor};
  std::vector<Moments> comps(orderings_.size());
  std::vector<int> clamps(orderings_.size(), 0);
  parallel_for(static_cast<int>(orderings_.size()), config_.threads, [&](int o) {
    const auto& st = orderings_[static_cast<std::size_t>(o)];
    std::vector<PriorState> priors;
    priors.reserve(st.factor_pools.size());
    for (const auto& pool : st.factor_pools) {
      const auto best = select_best(pool);
      priors.push_back(evolve(pool.states[best], pool.specs[best].delta, pool.specs[best].kappa));
    }
    comps[static_cast<std::size_t>(o)] =
        factor_moments(priors, st.perm, opts, &clamps[static_cast<std::size_t>(o)]);
  });
  std::vector<double> lp(orderings_.size());
  for (std::size_t o = 0; o < orderings_.size(); ++o) {
    lp[o] = orderings_[o].log_prob;
    clamps_ += clamps[o];
  }
  const auto mix = mixture_factor_moments(predict_probs(lp, config_.alpha_ord), comps);

  std::vector<EquationSelection> sels(assets_.size());
  std::vector<std::size_t> best(assets_.size());
  parallel_for(static_cast<int>(assets_.size()), config_.threads, [&](int i) {
    const auto& pool = assets_[static_cast<std::size_t>(i)];
    const auto b = select_best(pool);
    best[static_cast<std::size_t>(i)] = b;
    sels[static_cast<std::size_t>(i)] = {pool.specs[b].parents,
                                         evolve(pool.states[b], pool.specs[b].delta, pool.specs[b].kappa)};
  });
  auto out = asset_moments(mix, sels, opts, &clamps_);
  if (selections) *selections = std::move(sels);
  if (selected) *selected = std::move(best);
  return out;
}

double DrfdmFilter::assimilate(int t) {
  const VectorXd f = panel_.factors.row(t).transpose();
  std::vector<double> joint(orderings_.size(), 0.0);
  parallel_for(static_cast<int>(orderings_.size()), config_.threads, [&](int o) {
    auto& st = orderings_[static_cast<std::size_t>(o)];
    const VectorXd pos = to_positions(f, st.perm);
    double acc = 0.0;
    for (std::size_t p = 0; p < st.factor_pools.size(); ++p) {
      auto& pool = st.factor_pools[p];
      const auto best = select_best(pool);
      const auto idx = static_cast<Eigen::Index>(p);
      acc += assimilate_pool(pool, pos.head(idx), pos(idx))[best];
    }
    joint[static_cast<std::size_t>(o)] = acc;
  });
  update_ordering_probs(orderings_, joint, config_.alpha_ord);

  std::vector<double> lpd(assets_.size());
  parallel_for(static_cast<int>(assets_.size()), config_.threads, [&](int i) {
    auto& pool = assets_[static_cast<std::size_t>(i)];
    const auto best = select_best(pool);
    lpd[static_cast<std::size_t>(i)] = assimilate_pool(pool, f, panel_.returns(t, i))[best];
  });
  double total = 0.0;
  for (double v : lpd) total += v;
  return total;
}

VectorXd DrfdmFilter::mean_inclusion() const {
  const int k = panel_.n_factors();
  VectorXd out = VectorXd::Zero(k);
  for (const auto& pool : assets_)
    for (int j = 0; j < k; ++j) out(j) += inclusion_probability(pool, j);
  return out / static_cast<double>(std::max<std::size_t>(1, assets_.size()));
}

// ---------------------------------------------------------------------------

namespace {

ModelRun make_run(const std::string& name, const ReturnPanel& p) {
  const int e = p.periods() - p.train_len;
  ModelRun run;
  run.name = name;
  run.dates.assign(p.dates.begin() + p.train_len, p.dates.end());
  run.weights = MatrixXd::Zero(e, p.n_assets());
  run.mean_forecasts = MatrixXd::Zero(e, p.n_assets());
  run.gross = VectorXd::Zero(e);
  return run;
}

void finish_run(ModelRun& run, const ReturnPanel& p, long hits) {
  const auto e = run.gross.size();
  run.acc = e > 0 ? 100.0 * static_cast<double>(hits) / static_cast<double>(e * p.n_assets()) : 0.0;
  run.realized_variance =
      e > 1 ? (run.gross.array() - run.gross.mean()).square().sum() / static_cast<double>(e - 1) : 0.0;
}

ModelRun run_benchmark(const ReturnPanel& p, const RunConfig& cfg, CovarianceEstimator& est) {
  ModelRun run = make_run(est.name(), p);
  run.lpd = kNaN;
  long hits = 0;
  est.start(p);
  for (int t = 0; t < p.periods(); ++t) {
    if (t >= p.train_len) {
      const int row = t - p.train_len;
      with_context(est.name() + " at " + p.dates[static_cast<std::size_t>(t)], [&] {
        const auto m = est.forecast(p, t);
        const VectorXd r = p.returns.row(t).transpose();
        VectorXd w;
        if (est.equal_weight()) {
          w = ew_weights(p.n_assets());
        } else {
          const MatrixXd cov = regularize(m.cov, cfg.ridge);
          w = strategy_weights(cfg, m.mean, cov);
          run.moment_lpd += gaussian_log_density(m.mean, cov, r);
          run.mean_forecasts.row(row) = m.mean.transpose();
          hits += sign_hits(m.mean, r);
        }
        run.weights.row(row) = w.transpose();
        run.gross(row) = w.dot(r);
        return 0;
      });
    }
    with_context(est.name() + " update at " + p.dates[static_cast<std::size_t>(t)], [&] {
      est.observe(p, t);
      return 0;
    });
  }
  finish_run(run, p, hits);
  if (est.equal_weight()) {
    run.moment_lpd = kNaN;
    run.acc = kNaN;
  }
  return run;
}

}  // namespace

BacktestReport run_backtest(const ReturnPanel& input, const RunConfig& cfg,
                            const StepObserver& observer) {
  const ReturnPanel p = prepare_panel(input, cfg);
  BacktestReport rep;
  rep.asset_names = p.asset_names;
  rep.factor_names = p.factor_names;

  DrfdmFilter filter(p, cfg);
  for (const auto& o : filter.orderings()) rep.ordering_labels.push_back(ordering_label(o.perm, p.factor_names));
  const int e = p.periods() - p.train_len;
  rep.inclusion = MatrixXd::Zero(e, p.n_factors());
  rep.ordering_probs = MatrixXd::Zero(e, static_cast<Eigen::Index>(filter.orderings().size()));

  ModelRun run = make_run("DRFDM", p);
  long hits = 0;
  for (int t = 0; t < p.periods(); ++t) {
    const auto& date = p.dates[static_cast<std::size_t>(t)];
    if (t < p.train_len) {
      with_context("DRFDM training at " + date, [&] { return filter.assimilate(t); });
      continue;
    }
    const int row = t - p.train_len;
    StepRecord rec;
    rec.t = t;
    with_context("DRFDM at " + date, [&] {
      std::vector<EquationSelection> sels;
      rec.moments = filter.forecast(&sels, &rec.selected);
      for (const auto& s : sels) rec.masks.push_back(s.parents);
      const auto& m = rec.moments;
      const VectorXd mean =
          cfg.mean_source == MeanSource::model ? m.f : momentum_signal(p.returns, t);
      const VectorXd w = strategy_weights(cfg, mean, m.sigma_r);
      const VectorXd r = p.returns.row(t).transpose();
      run.weights.row(row) = w.transpose();
      run.gross(row) = w.dot(r);
      run.mean_forecasts.row(row) = m.f.transpose();
      run.moment_lpd += gaussian_log_density(m.f, m.sigma_r, r);
      hits += sign_hits(m.f, r);
      rec.lpd = filter.assimilate(t);
      return 0;
    });
    run.lpd += rec.lpd;
    rec.inclusion = filter.mean_inclusion();
    rep.inclusion.row(row) = rec.inclusion.transpose();
    for (std::size_t o = 0; o < filter.orderings().size(); ++o) {
      rec.ordering_log_probs.push_back(filter.orderings()[o].log_prob);
      rep.ordering_probs(row, static_cast<Eigen::Index>(o)) = std::exp(filter.orderings()[o].log_prob);
    }
    if (observer) observer(rec);
  }
  finish_run(run, p, hits);
  rep.dof_clamps = filter.dof_clamps();
  rep.runs.push_back(std::move(run));

  BenchmarkOptions bopts;
  bopts.window = cfg.rolling_window;
  bopts.ridge = cfg.ridge;
  for (const auto& name : cfg.benchmarks) {
    auto est = make_benchmark(name, bopts);
    rep.runs.push_back(run_benchmark(p, cfg, *est));
  }

  // Reference run for fees, matched by benchmark key or display name.
  const ModelRun* reference = nullptr;
  for (std::size_t i = 0; i < cfg.benchmarks.size(); ++i)
    if (cfg.benchmarks[i] == cfg.reference) reference = &rep.runs[i + 1];
  for (const auto& r : rep.runs)
    if (!reference && lower(r.name) == lower(cfg.reference)) reference = &r;

  for (double tc : cfg.tc_bps) {
    VectorXd ref_net;
    if (reference) ref_net = apply_costs(reference->gross, reference->weights,
                                         p.returns.bottomRows(e), tc, cfg.charge_entry).net;
    for (const auto& r : rep.runs) {
      const auto costs = apply_costs(r.gross, r.weights, p.returns.bottomRows(e), tc, cfg.charge_entry);
      ReportRow row;
      row.model = r.name;
      row.strategy = r.name == "EW" ? "ew" : strategy_name(cfg.strategy);
      row.tc_bps = tc;
      row.turnover = e > 0 ? costs.turnover.mean() : 0.0;
      const auto perf = performance(costs.net, cfg.periods_per_year);
      row.mean = perf.mean;
      row.sd = perf.sd;
      row.sr = perf.sr;
      row.lpd = r.lpd;
      row.moment_lpd = r.moment_lpd;
      row.acc = r.acc;
      for (double g : cfg.gammas)
        row.fees[g] = reference ? management_fee(costs.net, ref_net, g, cfg.periods_per_year) : kNaN;
      rep.rows.push_back(std::move(row));
    }
  }
  return rep;
}

StatisticsReport run_statistics_only(const ReturnPanel& input, const RunConfig& cfg) {
  const ReturnPanel p = prepare_panel(input, cfg);
  DrfdmFilter filter(p, cfg);
  StatisticsReport out;
  long hits = 0;
  for (int t = 0; t < p.periods(); ++t) {
    const auto& date = p.dates[static_cast<std::size_t>(t)];
    if (t < p.train_len) {
      with_context("DRFDM training at " + date, [&] { return filter.assimilate(t); });
      continue;
    }
    with_context("DRFDM at " + date, [&] {
      const auto m = filter.forecast();
      hits += sign_hits(m.f, p.returns.row(t).transpose());
      out.lpd += filter.assimilate(t);
      return 0;
    });
    ++out.evaluated;
  }
  out.acc = out.evaluated > 0
                ? 100.0 * static_cast<double>(hits) / (static_cast<double>(out.evaluated) * p.n_assets())
                : 0.0;
  out.moment_lpd = kNaN;
  return out;
}

}  // namespace drfdm
