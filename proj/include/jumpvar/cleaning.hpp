#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "jumpvar/error.hpp"
#include "jumpvar/io.hpp"
#include "jumpvar/marketdata.hpp"

namespace jumpvar {

struct QuoteFilterConfig {
  double spread_multiple = 10.0;
  double mad_multiple = 5.0;
  std::size_t mad_window = 50;

  void validate() const {
    if (!(spread_multiple > 0) || !(mad_multiple > 0)) throw ConfigError("quote filter: multiples must be positive");
    if (mad_window < 3) throw ConfigError("quote filter: mad_window must be at least 3");
  }
};

struct BfmConfig {
  std::int64_t forward_window_ms = 1000;
  std::int64_t backward_window_ms = 20 * 60 * 1000;
  bool retimestamp = false; // move matched trades to their matching quote's time

  void validate() const {
    if (forward_window_ms <= 0 || backward_window_ms <= 0) throw ConfigError("bfm: windows must be positive");
    if (forward_window_ms >= backward_window_ms) throw ConfigError("bfm: forward window must be shorter than backward");
  }
};

enum QuoteRule : std::size_t { irregular_condition = 0, zero_price, negative_spread, wide_spread, mad_band };

struct FilterStats {
  std::string instrument_id;
  std::string day;
  std::size_t raw_count = 0;
  std::size_t candidate_outliers = 0;
  std::size_t fwd_matched = 0;
  double fwd_mean_displacement_s = 0.0;
  std::size_t bwd_matched = 0;
  double bwd_mean_displacement_min = 0.0;
  std::size_t removed = 0;
  std::array<std::size_t, 5> rule_removed{}; // quote filter only, indexed by QuoteRule
  bool mad_skipped = false;
  bool empty_quotes = false;

  bool consistent() const { return removed + fwd_matched + bwd_matched == candidate_outliers; }
};

inline void write_filter_stats_header(std::ostream& out) {
  out << "instrument,day,raw_nobs,candidate_outliers,fwd_matched,fwd_mean_displacement_s,"
         "bwd_matched,bwd_mean_displacement_min,removed,flags\n";
}

inline void write_filter_stats_row(std::ostream& out, const FilterStats& s) {
  std::string flags;
  if (s.mad_skipped) flags += "mad_skipped";
  if (s.empty_quotes) flags += flags.empty() ? "empty_quotes" : ";empty_quotes";
  out << s.instrument_id << ',' << s.day << ',' << s.raw_count << ',' << s.candidate_outliers << ','
      << s.fwd_matched << ',' << io::fmt(s.fwd_mean_displacement_s) << ',' << s.bwd_matched << ','
      << io::fmt(s.bwd_mean_displacement_min) << ',' << s.removed << ',' << flags << '\n';
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

inline QuoteSeries select(const QuoteSeries& q, const std::vector<std::size_t>& keep) {
  QuoteSeries r;
  r.instrument_id = q.instrument_id;
  for (auto i : keep) {
    r.timestamps.push_back(q.timestamps[i]);
    r.bids.push_back(q.bids[i]);
    r.asks.push_back(q.asks[i]);
    if (!q.bid_sizes.empty()) r.bid_sizes.push_back(q.bid_sizes[i]);
    if (!q.ask_sizes.empty()) r.ask_sizes.push_back(q.ask_sizes[i]);
    if (!q.irregular.empty()) r.irregular.push_back(q.irregular[i]);
  }
  return r;
}

// Neighbour window for the rolling-mean rule: `w` observations around i, i excluded,
// half on each side and shifted inward at the edges. Returns [lo, hi) over indices.
inline std::pair<std::size_t, std::size_t> mad_neighbourhood(std::size_t i, std::size_t n, std::size_t w) {
  std::size_t span = std::min(w, n - 1) + 1; // includes i
  std::size_t before = (span - 1) / 2;
  std::size_t lo = i >= before ? i - before : 0;
  if (lo + span > n) lo = n - span;
  return {lo, lo + span};
}

} // namespace detail

// Rules in order: irregular condition, zero bid or ask, negative spread,
// spread above a multiple of the daily median, mid outside the rolling MAD band.
// The input is one session-day of quotes.
inline std::pair<QuoteSeries, FilterStats> bnhls_quote_filter(const QuoteSeries& q, const QuoteFilterConfig& cfg) {
  cfg.validate();
  FilterStats st;
  st.instrument_id = q.instrument_id;
  st.raw_count = q.size();

  std::vector<std::size_t> alive;
  alive.reserve(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q.is_irregular(i)) { ++st.rule_removed[irregular_condition]; continue; }
    if (!(q.bids[i] > 0) || !(q.asks[i] > 0)) { ++st.rule_removed[zero_price]; continue; }
    if (q.asks[i] < q.bids[i]) { ++st.rule_removed[negative_spread]; continue; }
    alive.push_back(i);
  }

  std::vector<double> spreads;
  spreads.reserve(alive.size());
  for (auto i : alive) spreads.push_back(q.asks[i] - q.bids[i]);
  const double limit = cfg.spread_multiple * detail::median(spreads);
  std::vector<std::size_t> next;
  next.reserve(alive.size());
  for (auto i : alive) {
    if (q.asks[i] - q.bids[i] > limit) ++st.rule_removed[wide_spread];
    else next.push_back(i);
  }
  alive.swap(next);

  if (alive.size() < cfg.mad_window) {
    st.mad_skipped = true;
  } else {
    const std::size_t n = alive.size();
    std::vector<double> mid(n);
    for (std::size_t k = 0; k < n; ++k) mid[k] = 0.5 * (q.bids[alive[k]] + q.asks[alive[k]]);
    next.clear();
    for (std::size_t k = 0; k < n; ++k) {
      auto [lo, hi] = detail::mad_neighbourhood(k, n, cfg.mad_window);
      double sum = 0;
      for (std::size_t m = lo; m < hi; ++m)
        if (m != k) sum += mid[m];
      const double cnt = static_cast<double>(hi - lo - 1);
      const double mean = sum / cnt;
      double dev = 0;
      for (std::size_t m = lo; m < hi; ++m)
        if (m != k) dev += std::abs(mid[m] - mean);
      dev /= cnt;
      if (std::abs(mid[k] - mean) > cfg.mad_multiple * dev) ++st.rule_removed[mad_band];
      else next.push_back(alive[k]);
    }
    alive.swap(next);
  }

  st.removed = q.size() - alive.size();
  st.candidate_outliers = st.removed;
  return {detail::select(q, alive), st};
}

namespace detail {

inline TickSeries select(const TickSeries& t, const std::vector<std::size_t>& keep) {
  TickSeries r;
  r.instrument_id = t.instrument_id;
  for (auto i : keep) {
    r.timestamps.push_back(t.timestamps[i]);
    r.prices.push_back(t.prices[i]);
    if (t.has_sizes()) r.sizes.push_back(t.sizes[i]);
    if (t.has_sides()) r.sides.push_back(t.sides[i]);
  }
  return r;
}

inline bool brackets(const QuoteSeries& q, std::size_t k, double p) { return q.bids[k] <= p && p <= q.asks[k]; }

// Index of the prevailing quote (last with ts <= t), or -1.
inline std::ptrdiff_t prevailing(const QuoteSeries& q, std::int64_t t) {
  auto it = std::upper_bound(q.timestamps.begin(), q.timestamps.end(), t);
  return static_cast<std::ptrdiff_t>(it - q.timestamps.begin()) - 1;
}

} // namespace detail

// Backward-forward matching of out-of-band trades against cleaned quotes.
inline std::pair<TickSeries, FilterStats> bfm_trade_filter(const TickSeries& trades, const QuoteSeries& quotes,
                                                           const BfmConfig& cfg) {
  cfg.validate();
  FilterStats st;
  st.instrument_id = trades.instrument_id;
  st.raw_count = trades.size();
  st.empty_quotes = quotes.empty();

  std::vector<std::size_t> keep;
  std::vector<std::int64_t> new_ts(trades.timestamps);
  keep.reserve(trades.size());
  double fwd_disp = 0, bwd_disp = 0;
  const std::ptrdiff_t nq = static_cast<std::ptrdiff_t>(quotes.size());

  for (std::size_t i = 0; i < trades.size(); ++i) {
    const std::int64_t t = trades.timestamps[i];
    const double p = trades.prices[i];
    const std::ptrdiff_t k = detail::prevailing(quotes, t);
    if (k >= 0 && detail::brackets(quotes, static_cast<std::size_t>(k), p)) {
      keep.push_back(i);
      continue;
    }
    ++st.candidate_outliers;

    bool matched = false;
    for (std::ptrdiff_t m = k + 1; m < nq && quotes.timestamps[m] <= t + cfg.forward_window_ms; ++m) {
      if (detail::brackets(quotes, static_cast<std::size_t>(m), p)) {
        ++st.fwd_matched;
        fwd_disp += static_cast<double>(quotes.timestamps[m] - t) / 1000.0;
        if (cfg.retimestamp) new_ts[i] = quotes.timestamps[m];
        matched = true;
        break;
      }
    }
    if (!matched) {
      for (std::ptrdiff_t m = k; m >= 0 && quotes.timestamps[m] >= t - cfg.backward_window_ms; --m) {
        if (detail::brackets(quotes, static_cast<std::size_t>(m), p)) {
          ++st.bwd_matched;
          bwd_disp += static_cast<double>(t - quotes.timestamps[m]) / 60000.0;
          if (cfg.retimestamp) new_ts[i] = quotes.timestamps[m];
          matched = true;
          break;
        }
      }
    }
    if (matched) keep.push_back(i);
    else ++st.removed;
  }
  if (st.fwd_matched) st.fwd_mean_displacement_s = fwd_disp / static_cast<double>(st.fwd_matched);
  if (st.bwd_matched) st.bwd_mean_displacement_min = bwd_disp / static_cast<double>(st.bwd_matched);

  if (cfg.retimestamp) {
    std::stable_sort(keep.begin(), keep.end(),
                     [&](std::size_t a, std::size_t b) { return new_ts[a] < new_ts[b]; });
    TickSeries out = detail::select(trades, keep);
    for (std::size_t j = 0; j < keep.size(); ++j) out.timestamps[j] = new_ts[keep[j]];
    return {out, st};
  }
  return {detail::select(trades, keep), st};
}

// Deletes every trade outside its prevailing quote band, with no matching.
inline std::pair<TickSeries, FilterStats> quote_band_filter(const TickSeries& trades, const QuoteSeries& quotes) {
  FilterStats st;
  st.instrument_id = trades.instrument_id;
  st.raw_count = trades.size();
  st.empty_quotes = quotes.empty();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < trades.size(); ++i) {
    auto k = detail::prevailing(quotes, trades.timestamps[i]);
    if (k >= 0 && detail::brackets(quotes, static_cast<std::size_t>(k), trades.prices[i])) keep.push_back(i);
    else ++st.candidate_outliers;
  }
  st.removed = st.candidate_outliers;
  return {detail::select(trades, keep), st};
}

} // namespace jumpvar
