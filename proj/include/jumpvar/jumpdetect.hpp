#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "jumpvar/error.hpp"
#include "jumpvar/marketdata.hpp"
#include "jumpvar/preavg.hpp"

namespace jumpvar {

enum class ThresholdRule {
  gumbel,   // extreme-value limit of the daily maximum
  exact_max // finite-n maximum of n independent standard normals
};

struct LmConfig {
  std::size_t M = 0; // 0: ceil(sqrt(252 n)) from the number of returns per day
  double significance = 0.01;
  ThresholdRule rule = ThresholdRule::gumbel;

  void validate() const {
    if (M != 0 && M < 3) throw ConfigError("lm: M must be at least 3");
    if (!(significance > 0 && significance < 1)) throw ConfigError("lm: significance must lie in (0,1)");
  }
};

struct MaxgapConfig {
  std::size_t delta = 5;
};

struct JumpEvent {
  std::size_t interval_index = 0;
  std::int64_t interval_start = 0;
  std::int64_t timestamp = 0; // interval end
  double statistic = 0;
  double size = 0;
  std::optional<double> maxgap;
};

inline std::size_t lm_default_M(std::size_t n_per_day) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(252.0 * static_cast<double>(n_per_day))));
}

// L_i = r_i / sigma_i, sigma_i^2 = (pi/2)/(M-2) sum_{j=i-M+2}^{i-1} |r_j||r_{j-1}|.
// Empty when the local window is flat.
inline std::optional<double> lm_statistic(std::span<const double> r, std::size_t M, std::size_t i) {
  if (M < 3) throw ConfigError("lm_statistic: M must be at least 3");
  if (i >= r.size()) throw ConfigError("lm_statistic: index out of range");
  if (i + 1 < M) throw InputError("lm_statistic: not enough history before index " + std::to_string(i));
  double s = 0;
  for (std::size_t j = i + 2 - M; j <= i - 1; ++j) s += std::abs(r[j]) * std::abs(r[j - 1]);
  const double var = (std::numbers::pi / 2.0) * s / static_cast<double>(M - 2);
  if (!(var > 0)) return std::nullopt;
  return r[i] / std::sqrt(var);
}

// Absolute threshold on |L_i| for n statistics per day, on the standard-normal scale of L_i.
inline double lm_threshold(std::size_t n, double significance, ThresholdRule rule = ThresholdRule::gumbel) {
  if (n < 2) throw ConfigError("lm_threshold: n must be at least 2");
  if (!(significance > 0 && significance < 1)) throw ConfigError("lm_threshold: significance must lie in (0,1)");
  const double nd = static_cast<double>(n);
  if (rule == ThresholdRule::exact_max) {
    // P(max |Z| <= c) = (2 Phi(c) - 1)^n = 1 - significance
    const double tail = -std::expm1(std::log1p(-significance) / nd); // 1 - (1-a)^{1/n}
    return normal_quantile(1.0 - tail / 2.0);
  }
  const double c0 = std::sqrt(2.0 / std::numbers::pi);
  const double a = std::sqrt(2.0 * std::log(nd));
  const double Cn = a / c0 - (std::log(std::numbers::pi) + std::log(std::log(nd))) / (2.0 * c0 * a);
  const double Sn = 1.0 / (c0 * a);
  const double beta = -std::log(-std::log1p(-significance));
  return c0 * (Cn + Sn * beta);
}

struct GridSpec {
  std::int64_t start_ms = 0;
  std::int64_t step_ms = 5 * 60 * 1000;
  std::int64_t end_ms = 0; // session length in ms

  std::size_t intervals() const {
    if (step_ms <= 0) throw ConfigError("grid step must be positive");
    if (end_ms - start_ms < step_ms) throw InputError("grid coarser than session");
    return static_cast<std::size_t>((end_ms - start_ms) / step_ms);
  }
};

struct JumpSummary {
  std::size_t count = 0;
  double avg_abs = 0;
  double max_abs = 0;
  double implied_jv = 0;
  double gap_avg = std::numeric_limits<double>::quiet_NaN();
  double gap_max = std::numeric_limits<double>::quiet_NaN();
};

struct LmScanResult {
  std::vector<JumpEvent> events;
  std::vector<double> returns;    // this day's returns on the scan grid, usable as history
  std::vector<double> statistics; // NaN where undefined or lacking history
  std::size_t n_statistics = 0;
  std::size_t M = 0;
  double threshold = 0;
  double variation = 0; // RV of the grid returns, or RV* for the pre-averaged scan
  JumpSummary summary;
};

namespace detail {

inline void summarize(LmScanResult& res) {
  auto& s = res.summary;
  s.count = res.events.size();
  double sum2 = 0, sumabs = 0;
  for (const auto& e : res.events) {
    sum2 += e.size * e.size;
    sumabs += std::abs(e.size);
    s.max_abs = std::max(s.max_abs, std::abs(e.size));
  }
  s.avg_abs = s.count ? sumabs / static_cast<double>(s.count) : 0.0;
  s.implied_jv = res.variation > 0 ? sum2 / res.variation : (s.count ? std::numeric_limits<double>::quiet_NaN() : 0.0);
}

// Statistics over `day` with `history` prepended; the threshold uses the count of defined statistics.
inline void run_lm(LmScanResult& res, std::span<const double> history, std::span<const double> day,
                   const LmConfig& cfg) {
  cfg.validate();
  res.M = cfg.M ? cfg.M : lm_default_M(day.size());
  std::vector<double> all(history.begin(), history.end());
  all.insert(all.end(), day.begin(), day.end());
  const std::size_t H = history.size();
  res.statistics.assign(day.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t eligible = 0;
  for (std::size_t k = 0; k < day.size(); ++k) {
    if (H + k + 1 < res.M) continue;
    ++eligible;
    auto L = lm_statistic(all, res.M, H + k);
    if (L) {
      res.statistics[k] = *L;
      ++res.n_statistics;
    }
  }
  if (eligible == 0)
    throw InputError("lm scan: series spans fewer than M=" + std::to_string(res.M) + " intervals (with history)");
  res.threshold = lm_threshold(std::max<std::size_t>(2, res.n_statistics), cfg.significance, cfg.rule);
}

} // namespace detail

// Lee-Mykland scan on a previous-tick grid. `history` holds earlier grid returns
// (oldest first) used to fill the local window at the start of the day.
inline LmScanResult lm_scan(const TickSeries& day, const GridSpec& grid, const LmConfig& cfg,
                            std::span<const double> history = {}) {
  const std::size_t n = grid.intervals();
  if (day.empty()) throw InputError("lm_scan: empty series");
  auto y = previous_tick_sample(day, grid.start_ms, grid.step_ms, n);
  LmScanResult res;
  res.returns = log_returns(y);
  res.variation = realized_variance(res.returns);
  detail::run_lm(res, history, res.returns, cfg);
  for (std::size_t k = 0; k < n; ++k) {
    double L = res.statistics[k];
    if (std::isnan(L) || !(std::abs(L) > res.threshold)) continue;
    JumpEvent e;
    e.interval_index = k;
    e.interval_start = grid.start_ms + static_cast<std::int64_t>(k) * grid.step_ms;
    e.timestamp = e.interval_start + grid.step_ms;
    e.statistic = L;
    e.size = res.returns[k];
    res.events.push_back(e);
  }
  detail::summarize(res);
  return res;
}

// Non-overlapping pre-averaged blocks R_b = r*_{bK}. The reported size is the
// pre-averaged return scaled by 1/max g, i.e. the gap between the averaged half-window prices.
inline LmScanResult preavg_lm_scan(const TickSeries& day, const PreAvgConfig& pcfg, const LmConfig& cfg,
                                   std::span<const double> history = {}) {
  pcfg.validate();
  auto y = day.log_prices();
  if (y.size() < 4) throw InputError("preavg_lm_scan: series too short");
  const std::size_t N = y.size() - 1;
  const int K = window_K(pcfg.theta, N);
  if (static_cast<std::size_t>(K) + 2 > y.size()) throw InputError("preavg_lm_scan: series too short for theta");
  auto rs = preavg_returns(y, K, pcfg.weight);
  const std::size_t Ku = static_cast<std::size_t>(K);
  double gmax = 0;
  for (int j = 1; j < K; ++j) gmax = std::max(gmax, std::abs(pcfg.weight(static_cast<double>(j) / K)));
  LmScanResult res;
  for (std::size_t b = 0; b * Ku < rs.size(); ++b) res.returns.push_back(rs[b * Ku]);
  res.variation = preavg_rv(y, pcfg);
  detail::run_lm(res, history, res.returns, cfg);
  for (std::size_t b = 0; b < res.returns.size(); ++b) {
    double L = res.statistics[b];
    if (std::isnan(L) || !(std::abs(L) > res.threshold)) continue;
    JumpEvent e;
    e.interval_index = b;
    e.interval_start = day.timestamps[b * Ku];
    e.timestamp = day.timestamps[b * Ku + Ku - 1];
    e.statistic = L;
    e.size = res.returns[b] / gmax;
    res.events.push_back(e);
  }
  detail::summarize(res);
  return res;
}

// g_j for each adjacent pair (j, j+1): B_j = {j-delta..j}, F_j = {j+1..j+1+delta}, clipped to the path.
inline std::vector<double> gap_profile(std::span<const double> y, std::size_t delta) {
  if (y.size() < 2) throw InputError("maxgap: need at least 2 ticks in the interval");
  const std::size_t m = y.size();
  std::vector<double> g(m - 1, 0.0);
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const std::size_t b0 = j >= delta ? j - delta : 0;
    const std::size_t f1 = std::min(m - 1, j + 1 + delta);
    if (y[j + 1] > y[j]) {
      double bmax = *std::max_element(y.begin() + b0, y.begin() + j + 1);
      double fmin = *std::min_element(y.begin() + j + 1, y.begin() + f1 + 1);
      g[j] = std::max(0.0, fmin - bmax);
    } else if (y[j + 1] < y[j]) {
      double bmin = *std::min_element(y.begin() + b0, y.begin() + j + 1);
      double fmax = *std::max_element(y.begin() + j + 1, y.begin() + f1 + 1);
      g[j] = std::min(0.0, fmax - bmin);
    }
  }
  return g;
}

struct MaxgapResult {
  double G = 0;
  std::size_t location = 0; // j of the pair (j, j+1), relative to the interval's first tick
  std::size_t n_ticks = 0;
};

inline MaxgapResult maxgap(std::span<const double> y, const MaxgapConfig& cfg) {
  auto g = gap_profile(y, cfg.delta);
  MaxgapResult r;
  r.n_ticks = y.size();
  double best = -1;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (std::abs(g[j]) > best) {
      best = std::abs(g[j]);
      r.G = g[j];
      r.location = j;
    }
  }
  return r;
}

// Maxgap over ticks with timestamps in [t0, t1], on log prices.
inline MaxgapResult maxgap(const TickSeries& s, std::int64_t t0, std::int64_t t1, const MaxgapConfig& cfg) {
  std::vector<double> y;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.timestamps[i] >= t0 && s.timestamps[i] <= t1) y.push_back(std::log(s.prices[i]));
  if (y.size() < 2) throw InputError("maxgap: empty interval");
  return maxgap(y, cfg);
}

// Fills event.maxgap from the ticks in each event's interval, then the G columns of the summary.
inline void attach_maxgap(LmScanResult& res, const TickSeries& day, const MaxgapConfig& cfg) {
  double sum = 0, mx = 0;
  std::size_t n = 0;
  for (auto& e : res.events) {
    try {
      e.maxgap = maxgap(day, e.interval_start, e.timestamp, cfg).G;
      sum += std::abs(*e.maxgap);
      mx = std::max(mx, std::abs(*e.maxgap));
      ++n;
    } catch (const InputError&) {
      e.maxgap.reset();
    }
  }
  if (n) {
    res.summary.gap_avg = sum / static_cast<double>(n);
    res.summary.gap_max = mx;
  }
}

} // namespace jumpvar
