// jumpvar: estimation, simulation and jump-scan front end.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "jumpvar/jumpvar.hpp"

namespace fs = std::filesystem;
using namespace jumpvar;

namespace {

constexpr const char* kVersion = "1.0.0";

struct GlobalOpts {
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  double burst_vol = 0.4; // annualized base volatility of the burst design
  ModelParams model;
};

struct SchemaOpts {
  std::string delimiter = ",";
  std::string ts_col = "timestamp";
  std::string price_col = "price";
  std::string size_col;
  std::string side_col;
  std::string ts_format = "millis";
  std::string session = "09:30-16:00";
  std::string tz = "America/New_York";
  std::int64_t tolerance_ms = 0;
  bool aggregate = true;
  std::string quotes;
  std::string bid_col = "bid";
  std::string ask_col = "ask";
  std::string condition_col;
  std::vector<std::string> regular_conditions;
  QuoteFilterConfig qcfg;
  BfmConfig bfm;

  SessionWindow window() const { return SessionWindow::parse(session, tz); }

  char delim() const {
    if (delimiter == "\\t" || delimiter == "tab") return '\t';
    if (delimiter.size() != 1) throw ConfigError("delimiter must be one character");
    return delimiter[0];
  }

  TickSchema ticks(const std::string& instrument) const {
    TickSchema s;
    s.delimiter = delim();
    s.timestamp_col = ts_col;
    s.price_col = price_col;
    s.size_col = size_col;
    s.side_col = side_col;
    s.ts_format = parse_timestamp_format(ts_format);
    s.session = window();
    s.regression_tolerance_ms = tolerance_ms;
    s.instrument_id = instrument;
    return s;
  }

  QuoteSchema quote_schema(const std::string& instrument) const {
    QuoteSchema s;
    s.delimiter = delim();
    s.timestamp_col = ts_col;
    s.bid_col = bid_col;
    s.ask_col = ask_col;
    s.condition_col = condition_col;
    s.regular_conditions = regular_conditions;
    s.ts_format = parse_timestamp_format(ts_format);
    s.session = window();
    s.regression_tolerance_ms = tolerance_ms;
    s.instrument_id = instrument;
    return s;
  }
};

struct PreAvgOpts {
  double alpha = 0.999;
  double varpi = 0.2;
  std::string weight = "triangular";
  int max_iterations = 50;

  PreAvgConfig config(double theta) const {
    PreAvgConfig c;
    c.theta = theta;
    c.alpha = alpha;
    c.varpi = varpi;
    c.max_truncation_iterations = max_iterations;
    if (weight == "triangular") c.weight = WeightFunction::triangular();
    else if (weight == "sine") c.weight = WeightFunction::sine();
    else throw ConfigError("unknown weight function '" + weight + "'");
    c.validate();
    return c;
  }
};

// --- small helpers ---------------------------------------------------------

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream o(p, std::ios::binary);
  if (!o) throw InputError("cannot write " + p.string());
  return o;
}

void write_meta(const fs::path& p, const CLI::App& app, const std::string& command,
                const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  auto o = open_out(p);
  o << "jumpvar_version=" << kVersion << "\ncommand=" << command << '\n';
  for (const auto& [k, v] : extra) o << k << '=' << v << '\n';
  // Global options plus the active command's own; usable as a --config file.
  std::istringstream all(app.config_to_str(true, false));
  std::string line;
  while (std::getline(all, line)) {
    auto dot = line.find('.');
    auto eq = line.find('=');
    if (dot != std::string::npos && dot < eq && line.compare(0, dot, command) != 0) continue;
    o << line << '\n';
  }
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + io::fmt(v[i]);
  return s;
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

double safe_log(double v) { return v > 0 ? std::log(v) : nan(); }

struct Frequency {
  std::string label;
  std::int64_t step_ms = 0; // 0: tick
};

Frequency parse_frequency(const std::string& s) {
  if (s == "tick") return {s, 0};
  std::size_t pos = 0;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  auto n = io::parse_int(std::string_view(s).substr(0, pos));
  std::string unit = s.substr(pos);
  if (!n || *n <= 0) throw ConfigError("bad frequency '" + s + "'");
  std::int64_t mult = 0;
  if (unit == "ms") mult = 1;
  else if (unit == "s") mult = 1000;
  else if (unit == "min" || unit == "m") mult = 60000;
  else if (unit == "h") mult = 3600000;
  else throw ConfigError("bad frequency unit in '" + s + "'");
  return {s, *n * mult};
}

std::vector<fs::path> list_inputs(const std::string& input) {
  if (input.empty()) throw InputError("no --input given");
  fs::path p(input);
  if (fs::is_regular_file(p)) return {p};
  if (!fs::is_directory(p)) throw InputError("missing input: " + input);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p)) {
    auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".tsv" || ext == ".txt")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("zero parseable rows (no input files in " + input + ")");
  return files;
}

// "<instrument>_<day>.csv"; without an underscore the whole stem is the instrument.
std::pair<std::string, std::string> split_stem(const fs::path& p) {
  std::string stem = p.stem().string();
  auto u = stem.rfind('_');
  if (u == std::string::npos || u == 0) return {stem, ""};
  return {stem.substr(0, u), stem.substr(u + 1)};
}

// --- per-day preparation -----------------------------------------------------

struct Day {
  fs::path file;
  std::string instrument, day;
  TickSeries ticks;
  std::size_t skipped = 0;
  std::optional<FilterStats> quote_stats, trade_stats;
};

Day load_day(const fs::path& file, const SchemaOpts& so) {
  Day d;
  d.file = file;
  std::tie(d.instrument, d.day) = split_stem(file);
  auto parsed = parse_ticks(file, so.ticks(d.instrument));
  d.skipped = parsed.skipped;
  auto clip = clip_session(parsed.series, so.window());
  if (clip.empty) throw InputError(file.string() + ": zero parseable rows inside the session window");
  TickSeries t = std::move(clip.series);
  if (!so.quotes.empty()) {
    fs::path qp = fs::is_directory(so.quotes) ? fs::path(so.quotes) / file.filename() : fs::path(so.quotes);
    auto q = clip_session(parse_quotes(qp, so.quote_schema(d.instrument)).series, so.window());
    auto [cq, qs] = bnhls_quote_filter(q, so.qcfg);
    auto [ct, ts] = bfm_trade_filter(t, cq, so.bfm);
    qs.day = ts.day = d.day;
    d.quote_stats = qs;
    d.trade_stats = ts;
    if (ct.empty()) throw InputError(file.string() + ": zero parseable rows left after cleaning");
    t = std::move(ct);
  }
  if (so.aggregate) t = aggregate_by_millisecond(t);
  d.ticks = std::move(t);
  return d;
}

struct Failure {
  std::string what;
  int code = 1;
};

int report_failures(const std::vector<std::optional<Failure>>& fails) {
  int code = 0;
  for (const auto& f : fails)
    if (f) {
      std::cerr << "jumpvar: " << f->what << '\n';
      code = std::max(code, f->code);
    }
  return code;
}

template <class Fn>
std::optional<Failure> guarded(const fs::path& file, Fn&& fn) {
  auto label = [&](const char* w) {
    std::string s = w;
    return s.rfind(file.string(), 0) == 0 ? s : file.string() + ": " + s;
  };
  try {
    fn();
  } catch (const InputError& e) {
    return Failure{label(e.what()), 2};
  } catch (const ConfigError& e) {
    return Failure{label(e.what()), 2};
  } catch (const ComputationError& e) {
    return Failure{label(e.what()), 1};
  }
  return std::nullopt;
}

// --- estimate --------------------------------------------------------------

struct EstimateOpts {
  std::string input, out = "estimate_out";
  double theta = 1.0;
  std::vector<std::string> frequencies = {"tick", "5min", "15min"};
};

struct EstimateRow {
  std::string frequency;
  VariationReport rep;
};

int cmd_estimate(const CLI::App& app, const GlobalOpts& g, const EstimateOpts& eo, const SchemaOpts& so,
                 const PreAvgOpts& po) {
  const auto pcfg = po.config(eo.theta);
  std::vector<Frequency> freqs;
  for (const auto& f : eo.frequencies) freqs.push_back(parse_frequency(f));
  const auto window = so.window();
  auto files = list_inputs(eo.input);

  std::vector<Day> days(files.size());
  std::vector<std::vector<EstimateRow>> rows(files.size());
  std::vector<std::optional<Failure>> fails(files.size());
  parallel_for(files.size(), g.jobs, [&](std::size_t i) {
    fails[i] = guarded(files[i], [&] {
      days[i] = load_day(files[i], so);
      const auto& t = days[i].ticks;
      for (const auto& f : freqs) {
        if (f.step_ms == 0) {
          rows[i].push_back({f.label, variation_report(t, pcfg)});
        } else {
          GridSpec grid{0, f.step_ms, window.length_ms()};
          auto y = previous_tick_sample(t, 0, f.step_ms, grid.intervals());
          rows[i].push_back({f.label, coarse_report(y)});
        }
      }
    });
  });

  fs::path out(eo.out);
  {
    auto o = open_out(out / "estimate.csv");
    o << "instrument,day,frequency,n_obs,K,rv,bv,rv_star,bv_star,bv_star_tau,omega2_hat,gamma_hat,jv,"
         "truncation_iterations\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (fails[i]) continue;
      for (const auto& r : rows[i]) {
        const auto& v = r.rep;
        o << days[i].instrument << ',' << days[i].day << ',' << r.frequency << ',' << v.n_obs << ',' << v.K << ','
          << io::fmt(v.rv) << ',' << io::fmt(v.bv) << ',' << io::fmt(v.rv_star) << ',' << io::fmt(v.bv_star) << ','
          << io::fmt(v.bv_star_tau) << ',' << io::fmt(v.omega2_hat) << ',' << io::fmt(v.gamma_hat) << ','
          << io::fmt(v.jv) << ',' << v.truncation_iterations << '\n';
      }
    }
  }
  {
    // Cross-day averages per instrument and frequency. The tick rows use RV* and
    // BV*_tau as the variation pair, coarse rows use RV and BV.
    struct Acc {
      std::size_t days = 0;
      double rv = 0, bv = 0, rvs = 0, bvs = 0, bvt = 0, qv = 0, iv = 0, jv = 0;
      std::size_t jv_n = 0;
    };
    std::map<std::pair<std::string, std::size_t>, Acc> acc;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (fails[i]) continue;
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        const auto& v = rows[i][k].rep;
        auto& a = acc[{days[i].instrument, k}];
        ++a.days;
        a.rv += v.rv;
        a.bv += v.bv;
        a.rvs += v.rv_star;
        a.bvs += v.bv_star;
        a.bvt += v.bv_star_tau;
        const bool tick = freqs[k].step_ms == 0;
        a.qv += tick ? v.rv_star : v.rv;
        a.iv += tick ? v.bv_star_tau : v.bv;
        if (std::isfinite(v.jv)) {
          a.jv += v.jv;
          ++a.jv_n;
        }
      }
    }
    auto o = open_out(out / "estimate_summary.csv");
    o << "instrument,frequency,days,rv,bv,rv_star,bv_star,bv_star_tau,vol_qv,vol_iv,jv_mean_daily,jv_pooled\n";
    for (const auto& [key, a] : acc) {
      const double n = static_cast<double>(a.days);
      const double qv = a.qv / n, iv = a.iv / n;
      o << key.first << ',' << freqs[key.second].label << ',' << a.days << ',' << io::fmt(a.rv / n) << ','
        << io::fmt(a.bv / n) << ',' << io::fmt(a.rvs / n) << ',' << io::fmt(a.bvs / n) << ',' << io::fmt(a.bvt / n)
        << ',' << io::fmt(annualized_vol(qv)) << ',' << io::fmt(annualized_vol(iv)) << ','
        << io::fmt(a.jv_n ? a.jv / static_cast<double>(a.jv_n) : nan()) << ','
        << io::fmt(qv > 0 ? jump_variation(qv, iv) : nan()) << '\n';
    }
  }
  if (!so.quotes.empty()) {
    auto oq = open_out(out / "quote_filter_stats.csv");
    auto ot = open_out(out / "trade_filter_stats.csv");
    write_filter_stats_header(oq);
    write_filter_stats_header(ot);
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (days[i].quote_stats) write_filter_stats_row(oq, *days[i].quote_stats);
      if (days[i].trade_stats) write_filter_stats_row(ot, *days[i].trade_stats);
    }
  }
  write_meta(out / "estimate.meta", app, "estimate");
  return report_failures(fails);
}

// --- simulate --------------------------------------------------------------

struct SimulateOpts {
  std::string model = "BM";
  std::size_t N = 40000;
  double gamma = 0.0;
  double beta = 0.0;
  double tick = 0.0; // > 0 rounds observed prices to this grid
  double level = 50.0;
  std::size_t paths = 1;
  std::uint64_t path_id = 0;
  std::string format = "path";
  std::string instrument = "SIM";
  std::string session = "09:30-16:00";
  std::string out = "sim.csv";
};

SimSpec make_spec(const GlobalOpts& g, Model m, std::size_t N, double gamma, double beta, std::uint64_t path) {
  SimSpec s;
  s.model = m;
  s.params = g.model;
  s.N = N;
  s.noise.gamma = gamma;
  s.noise.beta = beta;
  s.seed = g.seed;
  s.path_id = path;
  return s;
}

void write_path_meta(const fs::path& p, const CLI::App& app, const SimPath& path) {
  write_meta(p, app, "simulate",
             {{"path_id", std::to_string(path.path_id)},
              {"true_iv", io::fmt(path.true_iv)},
              {"true_jv_sum", io::fmt(path.true_jv_sum)},
              {"omega2", io::fmt(path.omega2)},
              {"jump_indices", join(path.jump_times)},
              {"jump_sizes", join(path.jump_sizes)},
              {"outlier_indices", join(path.outlier_times)},
              {"outlier_sizes", join(path.outlier_sizes)},
              {"rounded", path.rounded ? "true" : "false"}});
}

int cmd_simulate(const CLI::App& app, const GlobalOpts& g, const SimulateOpts& so) {
  const Model m = parse_model(so.model);
  if (so.format != "path" && so.format != "ticks") throw ConfigError("format must be path or ticks");
  if (so.paths == 0) throw ConfigError("paths must be positive");
  const auto window = SessionWindow::parse(so.session);
  std::vector<SimPath> paths(so.paths);
  parallel_for(so.paths, g.jobs, [&](std::size_t k) {
    auto spec = make_spec(g, m, so.N, so.gamma, so.beta, so.path_id + k);
    if (so.tick > 0) spec.rounding = RoundingSpec{so.tick, so.level};
    paths[k] = simulate(spec);
  });
  const bool many = so.paths > 1;
  for (std::size_t k = 0; k < so.paths; ++k) {
    const auto& p = paths[k];
    fs::path file = so.out;
    if (many) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05llu.csv", so.instrument.c_str(),
                    static_cast<unsigned long long>(p.path_id));
      file = fs::path(so.out) / name;
    }
    auto o = open_out(file);
    if (so.format == "path") {
      o << "index,efficient,observed\n";
      for (std::size_t i = 0; i < p.efficient_log_prices.size(); ++i)
        o << i << ',' << io::fmt(p.efficient_log_prices[i]) << ',' << io::fmt(p.observed_log_prices[i]) << '\n';
    } else {
      auto t = to_tick_series(p, so.instrument, window.length_ms(), so.level);
      TickSchema schema;
      schema.session = window;
      write_ticks(o, t, schema);
    }
    fs::path meta = file;
    meta += ".meta";
    write_path_meta(meta, app, p);
  }
  return 0;
}

// --- table2 ----------------------------------------------------------------

struct Table2Opts {
  std::size_t paths = 10000;
  std::size_t N = 40000;
  double gamma = 0.5;
  double dependent_beta = 0.77;
  std::vector<double> thetas = {0.1, 0.5, 1.0, 2.0, 5.0};
  std::vector<std::string> models = {"BM", "SV", "SV2F-LEV", "BMJ", "BMO"};
  std::string out = "table2.csv";
};

int cmd_table2(const CLI::App& app, const GlobalOpts& g, const Table2Opts& to, const PreAvgOpts& po) {
  if (to.paths == 0) throw ConfigError("paths must be positive");
  std::vector<Model> models;
  for (const auto& s : to.models) models.push_back(parse_model(s));
  std::vector<PreAvgConfig> cfgs;
  for (double th : to.thetas) cfgs.push_back(po.config(th));
  const double betas[2] = {0.0, to.dependent_beta};
  const char* panels[2] = {"iid", "dependent"};
  const std::size_t nm = models.size(), nt = cfgs.size();
  const std::size_t cells = nm * 2 * nt * 3;

  // values[path][cell]; NaN marks a failed truncation
  std::vector<std::vector<double>> values(to.paths, std::vector<double>(cells, nan()));
  parallel_for(to.paths, g.jobs, [&](std::size_t p) {
    auto& v = values[p];
    for (std::size_t mi = 0; mi < nm; ++mi) {
      auto base = simulate(make_spec(g, models[mi], to.N, 0.0, 0.0, p));
      for (std::size_t b = 0; b < 2; ++b) {
        NoiseSpec ns;
        ns.gamma = to.gamma;
        ns.beta = betas[b];
        auto path = add_noise(base, ns);
        const auto& y = path.observed_log_prices;
        for (std::size_t ti = 0; ti < nt; ++ti) {
          const std::size_t c = ((mi * 2 + b) * nt + ti) * 3;
          v[c] = preavg_rv(y, cfgs[ti]) / path.true_iv;
          v[c + 1] = preavg_bv(y, cfgs[ti]) / path.true_iv;
          try {
            v[c + 2] = truncated_preavg_bv(y, cfgs[ti]).bv_star_tau / path.true_iv;
          } catch (const ComputationError&) {
          }
        }
      }
    }
  });

  auto o = open_out(to.out);
  o << "panel,model,theta,estimator,mean,se,paths,failures\n";
  const char* est[3] = {"rv_star", "bv_star", "bv_star_tau"};
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t mi = 0; mi < nm; ++mi)
      for (std::size_t ti = 0; ti < nt; ++ti)
        for (std::size_t e = 0; e < 3; ++e) {
          const std::size_t c = ((mi * 2 + b) * nt + ti) * 3 + e;
          double s = 0, s2 = 0;
          std::size_t n = 0;
          for (std::size_t p = 0; p < to.paths; ++p) {
            double x = values[p][c];
            if (std::isnan(x)) continue;
            s += x;
            s2 += x * x;
            ++n;
          }
          const double mean = n ? s / static_cast<double>(n) : nan();
          const double var = n > 1 ? (s2 - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1) : nan();
          o << panels[b] << ',' << to_string(models[mi]) << ',' << io::fmt(to.thetas[ti]) << ',' << est[e] << ','
            << io::fmt(mean) << ',' << io::fmt(std::sqrt(std::max(0.0, var) / static_cast<double>(n))) << ',' << n
            << ',' << (to.paths - n) << '\n';
        }
  fs::path meta = to.out;
  meta += ".meta";
  write_meta(meta, app, "table2");
  return 0;
}

// --- signature -------------------------------------------------------------

struct SignatureOpts {
  std::string kind = "theta";
  std::string input;
  std::vector<double> thetas = {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0};
  std::string model = "BM";
  std::size_t paths = 1000;
  std::size_t N = 0; // 0: 40000 for theta, 32768 for jv
  double gamma = 0.5;
  double tick = 0.01;
  double level = 50.0;
  std::vector<std::size_t> samples = {32768, 16384, 8192, 4096, 2048, 1024, 512, 256, 128, 64, 32, 16};
  std::string out = "signature.csv";
};

int signature_theta(const GlobalOpts& g, const SignatureOpts& so, const SchemaOpts& sch, const PreAvgOpts& po,
                    std::ostream& o) {
  for (double th : so.thetas)
    if (!(th > 0)) throw ConfigError("theta grid values must be positive");
  std::vector<PreAvgConfig> cfgs;
  for (double th : so.thetas) cfgs.push_back(po.config(th));
  const std::size_t nt = cfgs.size();
  std::vector<std::vector<double>> rv, bvt; // [unit][theta]
  std::vector<double> truth;
  std::vector<std::optional<Failure>> fails;

  if (!so.input.empty()) {
    auto files = list_inputs(so.input);
    rv.assign(files.size(), std::vector<double>(nt, nan()));
    bvt = rv;
    fails.resize(files.size());
    parallel_for(files.size(), g.jobs, [&](std::size_t i) {
      fails[i] = guarded(files[i], [&] {
        auto y = load_day(files[i], sch).ticks.log_prices();
        for (std::size_t k = 0; k < nt; ++k) {
          rv[i][k] = preavg_rv(y, cfgs[k]);
          bvt[i][k] = truncated_preavg_bv(y, cfgs[k]).bv_star_tau;
        }
      });
    });
  } else {
    const Model m = parse_model(so.model);
    const std::size_t N = so.N ? so.N : 40000;
    rv.assign(so.paths, std::vector<double>(nt, nan()));
    bvt = rv;
    truth.assign(so.paths, 0.0);
    parallel_for(so.paths, g.jobs, [&](std::size_t p) {
      auto path = simulate(make_spec(g, m, N, so.gamma, 0.0, p));
      truth[p] = path.true_iv;
      for (std::size_t k = 0; k < nt; ++k) {
        rv[p][k] = preavg_rv(path.observed_log_prices, cfgs[k]);
        try {
          bvt[p][k] = truncated_preavg_bv(path.observed_log_prices, cfgs[k]).bv_star_tau;
        } catch (const ComputationError&) {
        }
      }
    });
  }
  double true_iv = nan();
  if (!truth.empty()) {
    true_iv = 0;
    for (double t : truth) true_iv += t;
    true_iv /= static_cast<double>(truth.size());
  }
  o << "theta,units,rv_star,bv_star_tau,vol_rv_star,vol_bv_star_tau,vol_true,jv\n";
  for (std::size_t k = 0; k < nt; ++k) {
    double a = 0, b = 0;
    std::size_t n = 0;
    for (std::size_t u = 0; u < rv.size(); ++u) {
      if (std::isnan(rv[u][k]) || std::isnan(bvt[u][k])) continue;
      a += rv[u][k];
      b += bvt[u][k];
      ++n;
    }
    const double ma = n ? a / static_cast<double>(n) : nan(), mb = n ? b / static_cast<double>(n) : nan();
    o << io::fmt(so.thetas[k]) << ',' << n << ',' << io::fmt(ma) << ',' << io::fmt(mb) << ','
      << io::fmt(annualized_vol(ma)) << ',' << io::fmt(annualized_vol(mb)) << ','
      << io::fmt(std::isnan(true_iv) ? nan() : annualized_vol(true_iv)) << ','
      << io::fmt(ma > 0 ? jump_variation(ma, mb) : nan()) << '\n';
  }
  return report_failures(fails);
}

// Implied JV from RV and BV against samples per day on the burst design.
int signature_jv(const GlobalOpts& g, const SignatureOpts& so, std::ostream& o) {
  const std::size_t N = so.N ? so.N : 32768;
  for (auto n : so.samples)
    if (n == 0 || N % n != 0) throw ConfigError("samples per day must divide N=" + std::to_string(N));
  const std::size_t nf = so.samples.size();
  // [path][freq][variant][rv|bv]
  std::vector<std::vector<double>> acc(so.paths, std::vector<double>(nf * 4, 0.0));
  parallel_for(so.paths, g.jobs, [&](std::size_t p) {
    auto spec = make_spec(g, Model::BURST, N, 0.0, 0.0, p);
    auto clean = simulate(spec);
    NoiseSpec ns;
    ns.gamma = so.gamma;
    auto noisy = add_noise(clean, ns);
    if (so.tick > 0) noisy = round_to_grid(std::move(noisy), so.tick, so.level);
    for (std::size_t f = 0; f < nf; ++f) {
      const std::size_t stride = N / so.samples[f];
      for (int v = 0; v < 2; ++v) {
        const auto& y = v == 0 ? clean.efficient_log_prices : noisy.observed_log_prices;
        std::vector<double> r;
        r.reserve(so.samples[f]);
        for (std::size_t i = stride; i <= N; i += stride) r.push_back(y[i] - y[i - stride]);
        acc[p][f * 4 + v * 2] = realized_variance(r);
        acc[p][f * 4 + v * 2 + 1] = bipower_variation(r);
      }
    }
  });
  o << "samples_per_day,jv_noise_free,jv_noisy,jv_pooled_noise_free,jv_pooled_noisy,log_samples,log_jv_noise_free,"
       "log_jv_noisy\n";
  for (std::size_t f = 0; f < nf; ++f) {
    double daily[2] = {0, 0}, rvs[2] = {0, 0}, bvs[2] = {0, 0};
    for (std::size_t p = 0; p < so.paths; ++p)
      for (int v = 0; v < 2; ++v) {
        double rv = acc[p][f * 4 + v * 2], bv = acc[p][f * 4 + v * 2 + 1];
        daily[v] += rv > 0 ? jump_variation(rv, bv) : 0.0;
        rvs[v] += rv;
        bvs[v] += bv;
      }
    const double n = static_cast<double>(so.paths);
    const double j0 = daily[0] / n, j1 = daily[1] / n;
    o << so.samples[f] << ',' << io::fmt(j0) << ',' << io::fmt(j1) << ',' << io::fmt(jump_variation(rvs[0], bvs[0]))
      << ',' << io::fmt(jump_variation(rvs[1], bvs[1])) << ',' << io::fmt(std::log(static_cast<double>(so.samples[f])))
      << ',' << io::fmt(safe_log(j0)) << ',' << io::fmt(safe_log(j1)) << '\n';
  }
  return 0;
}

int cmd_signature(const CLI::App& app, const GlobalOpts& g, const SignatureOpts& so, const SchemaOpts& sch,
                  const PreAvgOpts& po) {
  if (so.kind != "theta" && so.kind != "jv") throw ConfigError("signature kind must be theta or jv");
  if (so.input.empty() && so.paths == 0) throw ConfigError("paths must be positive");
  std::ostringstream body;
  int code = so.kind == "theta" ? signature_theta(g, so, sch, po, body) : signature_jv(g, so, body);
  auto o = open_out(so.out);
  o << body.str();
  fs::path meta = so.out;
  meta += ".meta";
  write_meta(meta, app, "signature");
  return code;
}

// --- jumpscan --------------------------------------------------------------

struct JumpscanOpts {
  std::string input, out = "jumpscan_out";
  double theta = 1.0;
  std::string frequency = "5min";
  std::size_t coarse_M = 0;
  std::size_t preavg_M = 0;
  double significance = 0.01;
  std::string rule = "gumbel";
  std::size_t delta = 5;
};

struct ScanDay {
  std::optional<LmScanResult> coarse, preavg;
  std::string coarse_note, preavg_note;
};

int cmd_jumpscan(const CLI::App& app, const GlobalOpts& g, const JumpscanOpts& jo, const SchemaOpts& so,
                 const PreAvgOpts& po) {
  const auto pcfg = po.config(jo.theta);
  const auto freq = parse_frequency(jo.frequency);
  if (freq.step_ms == 0) throw ConfigError("jumpscan needs a coarse --frequency");
  LmConfig base;
  base.significance = jo.significance;
  if (jo.rule == "gumbel") base.rule = ThresholdRule::gumbel;
  else if (jo.rule == "exact") base.rule = ThresholdRule::exact_max;
  else throw ConfigError("threshold rule must be gumbel or exact");
  base.validate();
  const MaxgapConfig mcfg{jo.delta};
  const auto window = so.window();
  const GridSpec grid{0, freq.step_ms, window.length_ms()};
  const std::size_t n_grid = grid.intervals();

  auto files = list_inputs(jo.input);
  // Days of one instrument run in order so earlier days fill the local window.
  std::map<std::string, std::vector<std::size_t>> by_inst;
  for (std::size_t i = 0; i < files.size(); ++i) by_inst[split_stem(files[i]).first].push_back(i);
  std::vector<std::string> insts;
  for (const auto& [k, v] : by_inst) insts.push_back(k);

  std::vector<Day> days(files.size());
  std::vector<ScanDay> scans(files.size());
  std::vector<std::optional<Failure>> fails(files.size());
  parallel_for(insts.size(), g.jobs, [&](std::size_t ii) {
    std::vector<double> hist_c, hist_p;
    for (std::size_t i : by_inst[insts[ii]]) {
      fails[i] = guarded(files[i], [&] {
        days[i] = load_day(files[i], so);
        const auto& t = days[i].ticks;
        auto& sc = scans[i];

        LmConfig cc = base;
        cc.M = jo.coarse_M ? jo.coarse_M : lm_default_M(n_grid);
        if (hist_c.size() + n_grid >= cc.M) {
          sc.coarse = lm_scan(t, grid, cc, hist_c);
          attach_maxgap(*sc.coarse, t, mcfg);
          hist_c.insert(hist_c.end(), sc.coarse->returns.begin(), sc.coarse->returns.end());
        } else {
          sc.coarse_note = "insufficient_history";
          auto y = previous_tick_sample(t, 0, grid.step_ms, n_grid);
          auto r = log_returns(y);
          hist_c.insert(hist_c.end(), r.begin(), r.end());
        }

        const auto y = t.log_prices();
        const std::size_t N = y.size() - 1;
        const int K = window_K(pcfg.theta, N);
        const std::size_t blocks = N + 1 > static_cast<std::size_t>(K) ? (N - static_cast<std::size_t>(K)) / K + 1 : 0;
        LmConfig pc = base;
        pc.M = jo.preavg_M ? jo.preavg_M : lm_default_M(blocks);
        if (blocks > 0 && hist_p.size() + blocks >= pc.M) {
          sc.preavg = preavg_lm_scan(t, pcfg, pc, hist_p);
          hist_p.insert(hist_p.end(), sc.preavg->returns.begin(), sc.preavg->returns.end());
        } else {
          sc.preavg_note = "insufficient_history";
          if (blocks > 0) {
            auto rs = preavg_returns(y, K, pcfg.weight);
            for (std::size_t b = 0; b * static_cast<std::size_t>(K) < rs.size(); ++b)
              hist_p.push_back(rs[b * static_cast<std::size_t>(K)]);
          }
        }
        if (hist_c.size() > 4 * cc.M) hist_c.erase(hist_c.begin(), hist_c.end() - static_cast<std::ptrdiff_t>(cc.M));
        if (hist_p.size() > 4 * pc.M) hist_p.erase(hist_p.begin(), hist_p.end() - static_cast<std::ptrdiff_t>(pc.M));
      });
    }
  });

  fs::path out(jo.out);
  {
    auto o = open_out(out / "jumpscan_days.csv");
    o << "instrument,day,method,n_statistics,M,threshold,J_count,J_avg,J_max,JV,G_avg,G_max,note\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (fails[i]) continue;
      auto row = [&](const char* method, const std::optional<LmScanResult>& r, const std::string& note) {
        o << days[i].instrument << ',' << days[i].day << ',' << method << ',';
        if (r) {
          const auto& s = r->summary;
          o << r->n_statistics << ',' << r->M << ',' << io::fmt(r->threshold) << ',' << s.count << ','
            << io::fmt(s.avg_abs) << ',' << io::fmt(s.max_abs) << ',' << io::fmt(s.implied_jv) << ','
            << io::fmt(s.gap_avg) << ',' << io::fmt(s.gap_max);
        } else {
          o << "0,,,0,0,0,0,nan,nan";
        }
        o << ',' << note << '\n';
      };
      row("coarse", scans[i].coarse, scans[i].coarse_note);
      row("preavg", scans[i].preavg, scans[i].preavg_note);
    }
  }
  {
    auto o = open_out(out / "jumpscan_events.csv");
    o << "instrument,day,method,interval_index,timestamp,statistic,size,maxgap\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (fails[i]) continue;
      for (int m = 0; m < 2; ++m) {
        const auto& r = m == 0 ? scans[i].coarse : scans[i].preavg;
        if (!r) continue;
        for (const auto& e : r->events)
          o << days[i].instrument << ',' << days[i].day << ',' << (m == 0 ? "coarse" : "preavg") << ','
            << e.interval_index << ',' << e.timestamp << ',' << io::fmt(e.statistic) << ',' << io::fmt(e.size) << ','
            << (e.maxgap ? io::fmt(*e.maxgap) : std::string()) << '\n';
      }
    }
  }
  {
    auto o = open_out(out / "jump_gap_pairs.csv");
    o << "instrument,day,timestamp,J,G\n";
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (fails[i] || !scans[i].coarse) continue;
      for (const auto& e : scans[i].coarse->events)
        if (e.maxgap)
          o << days[i].instrument << ',' << days[i].day << ',' << e.timestamp << ',' << io::fmt(e.size) << ','
            << io::fmt(*e.maxgap) << '\n';
    }
  }
  {
    // Per instrument and method, pooled over days: JV is the sum of squared
    // jump sizes over the summed day-level variation.
    auto o = open_out(out / "jumpscan_summary.csv");
    o << "instrument,method,days,J_count,J_avg,J_max,JV,G_avg,G_max\n";
    for (const auto& inst : insts) {
      for (int m = 0; m < 2; ++m) {
        std::size_t nd = 0, cnt = 0, gn = 0;
        double sabs = 0, mx = 0, s2 = 0, var = 0, gs = 0, gmx = 0;
        for (std::size_t i : by_inst[inst]) {
          if (fails[i]) continue;
          const auto& r = m == 0 ? scans[i].coarse : scans[i].preavg;
          if (!r) continue;
          ++nd;
          var += r->variation;
          for (const auto& e : r->events) {
            ++cnt;
            sabs += std::abs(e.size);
            mx = std::max(mx, std::abs(e.size));
            s2 += e.size * e.size;
            if (e.maxgap) {
              ++gn;
              gs += std::abs(*e.maxgap);
              gmx = std::max(gmx, std::abs(*e.maxgap));
            }
          }
        }
        o << inst << ',' << (m == 0 ? "coarse" : "preavg") << ',' << nd << ',' << cnt << ','
          << io::fmt(cnt ? sabs / static_cast<double>(cnt) : 0.0) << ',' << io::fmt(mx) << ','
          << io::fmt(var > 0 ? s2 / var : (cnt ? nan() : 0.0)) << ','
          << io::fmt(gn ? gs / static_cast<double>(gn) : nan()) << ',' << io::fmt(gn ? gmx : nan()) << '\n';
      }
    }
  }
  write_meta(out / "jumpscan.meta", app, "jumpscan");
  return report_failures(fails);
}

// --- sigmastar -------------------------------------------------------------

struct SigmaOpts {
  double sigma2 = 1.0;
  double omega2 = 0.0;
  double theta = 1.0;
  std::size_t draws = 200000;
  std::string out = "sigma_star.csv";
};

int cmd_sigmastar(const CLI::App& app, const GlobalOpts& g, const SigmaOpts& so, const PreAvgOpts& po) {
  auto cfg = po.config(so.theta);
  SigmaStarOptions opt;
  opt.mc_draws = so.draws;
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  const double s2 = so.sigma2;
  auto s = sigma_star([s2](double) { return s2; }, so.omega2, so.theta, cfg.weight, opt);
  auto o = open_out(so.out);
  o << "row,rv_star,bv_star\n";
  o << "rv_star," << io::fmt(s.s11) << ',' << io::fmt(s.s12) << '\n';
  o << "bv_star," << io::fmt(s.s12) << ',' << io::fmt(s.s22) << '\n';
  fs::path meta = so.out;
  meta += ".meta";
  write_meta(meta, app, "sigmastar", {{"correlation", io::fmt(s.correlation())}});
  return 0;
}

// --- option wiring ---------------------------------------------------------

void add_model_options(CLI::App& app, GlobalOpts& g) {
  auto& m = g.model;
  auto* grp = app.add_option_group("model", "simulation model parameters (calibration defaults)");
  grp->add_option("--sigma2", m.sigma2, "daily variance for BM, BMJ, BMO");
  grp->add_option("--jump-share", m.jump_share, "jump or outlier share of mean total variation");
  grp->add_option("--heston-kappa", m.heston.kappa);
  grp->add_option("--heston-vbar", m.heston.vbar);
  grp->add_option("--heston-xi", m.heston.xi);
  grp->add_option("--heston-rho", m.heston.rho);
  grp->add_option("--heston-v0", m.heston.v0, "negative: stationary draw");
  grp->add_option("--heston-substeps", m.heston.substeps);
  grp->add_option("--sv2f-beta0", m.sv2f.beta0);
  grp->add_option("--sv2f-beta1", m.sv2f.beta1);
  grp->add_option("--sv2f-beta2", m.sv2f.beta2);
  grp->add_option("--sv2f-alpha1", m.sv2f.alpha1);
  grp->add_option("--sv2f-alpha2", m.sv2f.alpha2);
  grp->add_option("--sv2f-beta-phi", m.sv2f.beta_phi);
  grp->add_option("--sv2f-rho1", m.sv2f.rho1);
  grp->add_option("--sv2f-rho2", m.sv2f.rho2);
  grp->add_option("--sv2f-mu", m.sv2f.mu);
  grp->add_option("--sv2f-scale", m.sv2f.scale);
  grp->add_option("--sv2f-substeps", m.sv2f.substeps);
  grp->add_option("--burst-vol", g.burst_vol, "annualized base volatility of the burst design");
  grp->add_option("--burst-multiplier", m.burst.multiplier);
  grp->add_option("--burst-start", m.burst.start);
  grp->add_option("--burst-end", m.burst.end);
}

void add_schema_options(CLI::App* sub, SchemaOpts& s) {
  sub->add_option("--delimiter", s.delimiter, "field delimiter, or tab");
  sub->add_option("--ts-col", s.ts_col);
  sub->add_option("--price-col", s.price_col);
  sub->add_option("--size-col", s.size_col);
  sub->add_option("--side-col", s.side_col);
  sub->add_option("--ts-format", s.ts_format, "millis, seconds or clock");
  sub->add_option("--session", s.session, "HH:MM-HH:MM");
  sub->add_option("--tz", s.tz);
  sub->add_option("--tolerance-ms", s.tolerance_ms, "timestamp regression tolerance");
  sub->add_option("--aggregate", s.aggregate, "merge ticks sharing a millisecond");
  sub->add_option("--quotes", s.quotes, "quote file or directory; enables cleaning");
  sub->add_option("--bid-col", s.bid_col);
  sub->add_option("--ask-col", s.ask_col);
  sub->add_option("--condition-col", s.condition_col);
  sub->add_option("--regular-conditions", s.regular_conditions)->delimiter(',');
  sub->add_option("--spread-multiple", s.qcfg.spread_multiple);
  sub->add_option("--mad-multiple", s.qcfg.mad_multiple);
  sub->add_option("--mad-window", s.qcfg.mad_window);
  sub->add_option("--bfm-forward-ms", s.bfm.forward_window_ms);
  sub->add_option("--bfm-backward-ms", s.bfm.backward_window_ms);
  sub->add_option("--bfm-retimestamp", s.bfm.retimestamp);
}

void add_preavg_options(CLI::App* sub, PreAvgOpts& p) {
  sub->add_option("--alpha", p.alpha, "truncation quantile level");
  sub->add_option("--varpi", p.varpi, "truncation rate exponent");
  sub->add_option("--weight", p.weight, "triangular or sine");
  sub->add_option("--max-truncation-iterations", p.max_iterations);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"jumpvar: jump variation from noisy tick data"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "INI file; top-level keys set global options, [command] sections set command options");
  app.fallthrough();
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "base seed");
  app.add_option("--jobs", g.jobs, "worker threads");
  add_model_options(app, g);

  SchemaOpts schema;
  PreAvgOpts preavg;

  EstimateOpts eo;
  auto* est = app.add_subcommand("estimate", "variation report per instrument-day");
  est->add_option("--input", eo.input, "tick file or directory of <instrument>_<day>.csv files")->required();
  est->add_option("--out", eo.out, "output directory");
  est->add_option("--theta", eo.theta, "pre-averaging horizon");
  est->add_option("--frequency", eo.frequencies, "tick and/or grid steps such as 5min")->delimiter(',');
  add_schema_options(est, schema);
  add_preavg_options(est, preavg);

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "simulate one or more price paths");
  sim->add_option("--model", so.model, "BM, SV, SV2F-LEV, BMJ, BMO or BURST");
  sim->add_option("-N,--n-obs", so.N, "returns per path");
  sim->add_option("--gamma", so.gamma, "noise ratio");
  sim->add_option("--beta", so.beta, "AR(1) noise coefficient");
  sim->add_option("--tick", so.tick, "round observed prices to this tick (0: off)");
  sim->add_option("--level", so.level, "starting price level");
  sim->add_option("--paths", so.paths, "number of paths; above 1 --out is a directory");
  sim->add_option("--path-id", so.path_id, "first path index");
  sim->add_option("--format", so.format, "path (index,efficient,observed) or ticks");
  sim->add_option("--instrument", so.instrument);
  sim->add_option("--session", so.session, "session for tick output");
  sim->add_option("--out", so.out, "output file, or directory when --paths > 1");

  Table2Opts to;
  auto* t2 = app.add_subcommand("table2", "normalized means of RV*, BV*, BV*_tau over simulated paths");
  t2->add_option("--paths", to.paths);
  t2->add_option("-N,--n-obs", to.N);
  t2->add_option("--gamma", to.gamma);
  t2->add_option("--dependent-beta", to.dependent_beta);
  t2->add_option("--theta", to.thetas)->delimiter(',');
  t2->add_option("--models", to.models)->delimiter(',');
  t2->add_option("--out", to.out);
  add_preavg_options(t2, preavg);

  SignatureOpts sg;
  auto* sig = app.add_subcommand("signature", "theta- or frequency-signature plot data");
  sig->add_option("kind", sg.kind, "theta or jv");
  sig->add_option("--input", sg.input, "tick files (theta kind); simulated when empty");
  sig->add_option("--theta", sg.thetas)->delimiter(',');
  sig->add_option("--model", sg.model);
  sig->add_option("--paths", sg.paths);
  sig->add_option("-N,--n-obs", sg.N, "0: 40000 (theta) or 32768 (jv)");
  sig->add_option("--gamma", sg.gamma);
  sig->add_option("--tick", sg.tick, "rounding tick for the noisy jv variant (0: off)");
  sig->add_option("--level", sg.level);
  sig->add_option("--frequency", sg.samples, "samples per day (jv kind)")->delimiter(',');
  sig->add_option("--out", sg.out);
  add_schema_options(sig, schema);
  add_preavg_options(sig, preavg);

  JumpscanOpts jo;
  auto* js = app.add_subcommand("jumpscan", "coarse and pre-averaged jump scans with maxgap");
  js->add_option("--input", jo.input)->required();
  js->add_option("--out", jo.out, "output directory");
  js->add_option("--theta", jo.theta);
  js->add_option("--frequency", jo.frequency, "coarse grid step");
  js->add_option("--coarse-window", jo.coarse_M, "local window M on the coarse grid (0: default)");
  js->add_option("--preavg-window", jo.preavg_M, "local window M on pre-averaged blocks (0: default)");
  js->add_option("--significance", jo.significance);
  js->add_option("--rule", jo.rule, "gumbel or exact");
  js->add_option("--delta", jo.delta, "maxgap window per side");
  add_schema_options(js, schema);
  add_preavg_options(js, preavg);

  SigmaOpts sso;
  auto* ss = app.add_subcommand("sigmastar", "asymptotic covariance of (RV*, BV*)");
  ss->add_option("--sigma2", sso.sigma2);
  ss->add_option("--omega2", sso.omega2);
  ss->add_option("--theta", sso.theta);
  ss->add_option("--draws", sso.draws);
  ss->add_option("--out", sso.out);
  add_preavg_options(ss, preavg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    g.model.burst.sigma_star2 = g.burst_vol * g.burst_vol / 252.0;
    if (*est) return cmd_estimate(app, g, eo, schema, preavg);
    if (*sim) return cmd_simulate(app, g, so);
    if (*t2) return cmd_table2(app, g, to, preavg);
    if (*sig) return cmd_signature(app, g, sg, schema, preavg);
    if (*js) return cmd_jumpscan(app, g, jo, schema, preavg);
    if (*ss) return cmd_sigmastar(app, g, sso, preavg);
  } catch (const InputError& e) {
    std::cerr << "jumpvar: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "jumpvar: " << e.what() << '\n';
    return 2;
  } catch (const ComputationError& e) {
    std::cerr << "jumpvar: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "jumpvar: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
