#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "jumpvar/error.hpp"
#include "jumpvar/io.hpp"

namespace jumpvar {

enum class Side : std::uint8_t { paid, given, unknown };

inline const char* to_string(Side s) {
  switch (s) {
  case Side::paid: return "paid";
  case Side::given: return "given";
  default: return "unknown";
  }
}

inline Side parse_side(std::string_view s) {
  s = io::trim(s);
  if (s == "paid" || s == "P" || s == "B" || s == "buy") return Side::paid;
  if (s == "given" || s == "G" || s == "S" || s == "sell") return Side::given;
  return Side::unknown;
}

struct TickSeries {
  std::string instrument_id;
  std::vector<std::int64_t> timestamps; // ms since session start
  std::vector<double> prices;           // price levels, > 0
  std::vector<double> sizes;            // empty when absent
  std::vector<Side> sides;              // empty when absent

  std::size_t size() const { return prices.size(); }
  bool empty() const { return prices.empty(); }
  bool has_sizes() const { return !sizes.empty(); }
  bool has_sides() const { return !sides.empty(); }

  std::vector<double> log_prices() const {
    std::vector<double> y(prices.size());
    std::transform(prices.begin(), prices.end(), y.begin(), [](double p) { return std::log(p); });
    return y;
  }

  static TickSeries from_log_prices(std::string id, std::vector<std::int64_t> ts, const std::vector<double>& y) {
    TickSeries s;
    s.instrument_id = std::move(id);
    s.timestamps = std::move(ts);
    s.prices.resize(y.size());
    std::transform(y.begin(), y.end(), s.prices.begin(), [](double v) { return std::exp(v); });
    s.validate();
    return s;
  }

  void validate() const {
    if (timestamps.size() != prices.size()) throw InputError("tick series: timestamp/price length mismatch");
    if (has_sizes() && sizes.size() != prices.size()) throw InputError("tick series: size column length mismatch");
    if (has_sides() && sides.size() != prices.size()) throw InputError("tick series: side column length mismatch");
    for (std::size_t i = 0; i < prices.size(); ++i) {
      if (!(prices[i] > 0) || !std::isfinite(prices[i])) throw InputError("tick series: non-positive price");
      if (i > 0 && timestamps[i] < timestamps[i - 1]) throw InputError("tick series: timestamps decrease");
    }
  }
};

struct QuoteSeries {
  std::string instrument_id;
  std::vector<std::int64_t> timestamps;
  std::vector<double> bids;
  std::vector<double> asks;
  std::vector<double> bid_sizes; // empty when absent
  std::vector<double> ask_sizes;
  std::vector<std::uint8_t> irregular; // condition flag per quote; empty means all regular

  std::size_t size() const { return bids.size(); }
  bool empty() const { return bids.empty(); }
  bool is_irregular(std::size_t i) const { return !irregular.empty() && irregular[i] != 0; }
};

// Wall-clock session, milliseconds since midnight in the labelled zone.
struct SessionWindow {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::string tz = "UTC";

  SessionWindow() = default;
  SessionWindow(std::int64_t start, std::int64_t end, std::string zone = "UTC")
      : start_ms(start), end_ms(end), tz(std::move(zone)) {
    if (!(start_ms < end_ms)) throw ConfigError("session window: start must precede end");
  }

  std::int64_t length_ms() const { return end_ms - start_ms; }

  static SessionWindow us_equity() { return {9 * 3600000LL + 30 * 60000LL, 16 * 3600000LL, "America/New_York"}; }
  static SessionWindow fx_london_ny() { return {7 * 3600000LL, 19 * 3600000LL, "Europe/London"}; }

  // "HH:MM[:SS[.mmm]]-HH:MM[:SS[.mmm]]"
  static SessionWindow parse(std::string_view text, std::string zone = "UTC");
};

// Wall-clock text to ms since midnight.
inline std::optional<std::int64_t> parse_clock(std::string_view s) {
  s = io::trim(s);
  auto parts = io::split(s, ':');
  if (parts.size() < 2 || parts.size() > 3) return std::nullopt;
  auto h = io::parse_int(parts[0]);
  auto m = io::parse_int(parts[1]);
  if (!h || !m || *h < 0 || *h > 23 || *m < 0 || *m > 59) return std::nullopt;
  std::int64_t ms = (*h * 60 + *m) * 60000;
  if (parts.size() == 3) {
    auto sec = io::parse_double(parts[2]);
    if (!sec || *sec < 0 || *sec >= 61) return std::nullopt;
    ms += static_cast<std::int64_t>(std::llround(*sec * 1000.0));
  }
  return ms;
}

inline std::string format_clock(std::int64_t ms_of_day) {
  std::int64_t h = ms_of_day / 3600000, m = (ms_of_day / 60000) % 60, s = (ms_of_day / 1000) % 60,
               f = ms_of_day % 1000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld", static_cast<long long>(h),
                static_cast<long long>(m), static_cast<long long>(s), static_cast<long long>(f));
  return buf;
}

inline SessionWindow SessionWindow::parse(std::string_view text, std::string zone) {
  auto dash = text.find('-');
  if (dash == std::string_view::npos) throw ConfigError("session window: expected START-END");
  auto a = parse_clock(text.substr(0, dash));
  auto b = parse_clock(text.substr(dash + 1));
  if (!a || !b) throw ConfigError("session window: bad clock time in '" + std::string(text) + "'");
  return SessionWindow(*a, *b, std::move(zone));
}

enum class TimestampFormat {
  millis,  // integer ms since session start
  seconds, // decimal seconds since session start
  clock    // HH:MM:SS.mmm wall clock, converted with the schema's session start
};

inline TimestampFormat parse_timestamp_format(std::string_view s) {
  if (s == "ms" || s == "millis") return TimestampFormat::millis;
  if (s == "s" || s == "seconds") return TimestampFormat::seconds;
  if (s == "hms" || s == "clock") return TimestampFormat::clock;
  throw ConfigError("unknown timestamp format '" + std::string(s) + "'");
}

struct TickSchema {
  char delimiter = ',';
  std::string timestamp_col = "timestamp";
  std::string price_col = "price";
  std::string size_col;  // empty: column absent
  std::string side_col;
  TimestampFormat ts_format = TimestampFormat::millis;
  SessionWindow session = SessionWindow::us_equity();
  std::int64_t regression_tolerance_ms = 0;
  std::string instrument_id;
};

struct QuoteSchema {
  char delimiter = ',';
  std::string timestamp_col = "timestamp";
  std::string bid_col = "bid";
  std::string ask_col = "ask";
  std::string bid_size_col;
  std::string ask_size_col;
  std::string condition_col;                // empty: every quote regular
  std::vector<std::string> regular_conditions; // accepted codes when condition_col is set
  TimestampFormat ts_format = TimestampFormat::millis;
  SessionWindow session = SessionWindow::us_equity();
  std::int64_t regression_tolerance_ms = 0;
  std::string instrument_id;
};

template <class T>
struct ParseResult {
  T series;
  std::size_t skipped = 0;
};

namespace detail {

inline std::optional<std::int64_t> parse_timestamp(std::string_view s, TimestampFormat f, const SessionWindow& w) {
  switch (f) {
  case TimestampFormat::millis: return io::parse_int(s);
  case TimestampFormat::seconds: {
    auto v = io::parse_double(s);
    if (!v) return std::nullopt;
    return static_cast<std::int64_t>(std::llround(*v * 1000.0));
  }
  case TimestampFormat::clock: {
    auto v = parse_clock(s);
    if (!v) return std::nullopt;
    return *v - w.start_ms;
  }
  }
  return std::nullopt;
}

inline std::string format_timestamp(std::int64_t t, TimestampFormat f, const SessionWindow& w) {
  switch (f) {
  case TimestampFormat::millis: return std::to_string(t);
  case TimestampFormat::seconds: {
    std::string sign = t < 0 ? "-" : "";
    std::int64_t a = t < 0 ? -t : t;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s%lld.%03lld", sign.c_str(), static_cast<long long>(a / 1000),
                  static_cast<long long>(a % 1000));
    return buf;
  }
  case TimestampFormat::clock: return format_clock(t + w.start_ms);
  }
  return {};
}

inline int column_index(const std::vector<std::string_view>& header, const std::string& name, bool required) {
  if (name.empty()) return -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  if (required) throw InputError("missing column '" + name + "'");
  return -1;
}

inline std::int64_t check_order(std::int64_t t, std::optional<std::int64_t>& last, std::int64_t tol, std::size_t line) {
  if (last && t < *last) {
    if (*last - t > tol)
      throw InputError("timestamp regression of " + std::to_string(*last - t) + " ms at line " + std::to_string(line));
    t = *last;
  }
  last = t;
  return t;
}

inline std::ifstream open_or_throw(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("missing file: " + path.string());
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  return in;
}

} // namespace detail

// Rows with unparseable fields or non-positive prices are skipped and counted.
// Small timestamp regressions within tolerance are clamped to the previous stamp.
inline ParseResult<TickSeries> parse_ticks(std::istream& in, const TickSchema& schema) {
  ParseResult<TickSeries> out;
  out.series.instrument_id = schema.instrument_id;
  std::string line;
  if (!std::getline(in, line)) throw InputError("zero parseable rows");
  std::string header_line = line;
  auto header = io::split(header_line, schema.delimiter);
  int ts_i = detail::column_index(header, schema.timestamp_col, true);
  int px_i = detail::column_index(header, schema.price_col, true);
  int sz_i = detail::column_index(header, schema.size_col, true);
  int sd_i = detail::column_index(header, schema.side_col, true);
  int need = std::max({ts_i, px_i, sz_i, sd_i});
  std::optional<std::int64_t> last;
  std::size_t lineno = 1;
  auto& s = out.series;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    auto f = io::split(line, schema.delimiter);
    if (static_cast<int>(f.size()) <= need) { ++out.skipped; continue; }
    auto t = detail::parse_timestamp(f[ts_i], schema.ts_format, schema.session);
    auto p = io::parse_double(f[px_i]);
    if (!t || !p || !(*p > 0)) { ++out.skipped; continue; }
    std::optional<double> q;
    if (sz_i >= 0) {
      q = io::parse_double(f[sz_i]);
      if (!q || *q < 0) { ++out.skipped; continue; }
    }
    s.timestamps.push_back(detail::check_order(*t, last, schema.regression_tolerance_ms, lineno));
    s.prices.push_back(*p);
    if (q) s.sizes.push_back(*q);
    if (sd_i >= 0) s.sides.push_back(parse_side(f[sd_i]));
  }
  if (s.empty()) throw InputError("zero parseable rows (" + std::to_string(out.skipped) + " skipped)");
  return out;
}

inline ParseResult<TickSeries> parse_ticks(const std::filesystem::path& path, const TickSchema& schema) {
  auto in = detail::open_or_throw(path);
  try {
    return parse_ticks(in, schema);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline void write_ticks(std::ostream& out, const TickSeries& s, const TickSchema& schema) {
  const char d = schema.delimiter;
  out << schema.timestamp_col << d << schema.price_col;
  bool sizes = s.has_sizes() && !schema.size_col.empty();
  bool sides = s.has_sides() && !schema.side_col.empty();
  if (sizes) out << d << schema.size_col;
  if (sides) out << d << schema.side_col;
  out << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << detail::format_timestamp(s.timestamps[i], schema.ts_format, schema.session) << d << io::fmt(s.prices[i]);
    if (sizes) out << d << io::fmt(s.sizes[i]);
    if (sides) out << d << to_string(s.sides[i]);
    out << '\n';
  }
}

inline ParseResult<QuoteSeries> parse_quotes(std::istream& in, const QuoteSchema& schema) {
  ParseResult<QuoteSeries> out;
  out.series.instrument_id = schema.instrument_id;
  std::string line;
  if (!std::getline(in, line)) throw InputError("zero parseable rows");
  std::string header_line = line;
  auto header = io::split(header_line, schema.delimiter);
  int ts_i = detail::column_index(header, schema.timestamp_col, true);
  int b_i = detail::column_index(header, schema.bid_col, true);
  int a_i = detail::column_index(header, schema.ask_col, true);
  int bs_i = detail::column_index(header, schema.bid_size_col, true);
  int as_i = detail::column_index(header, schema.ask_size_col, true);
  int c_i = detail::column_index(header, schema.condition_col, true);
  int need = std::max({ts_i, b_i, a_i, bs_i, as_i, c_i});
  std::optional<std::int64_t> last;
  std::size_t lineno = 1;
  auto& s = out.series;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    auto f = io::split(line, schema.delimiter);
    if (static_cast<int>(f.size()) <= need) { ++out.skipped; continue; }
    auto t = detail::parse_timestamp(f[ts_i], schema.ts_format, schema.session);
    auto b = io::parse_double(f[b_i]);
    auto a = io::parse_double(f[a_i]);
    if (!t || !b || !a) { ++out.skipped; continue; }
    std::optional<double> bs, as;
    if (bs_i >= 0 && !(bs = io::parse_double(f[bs_i]))) { ++out.skipped; continue; }
    if (as_i >= 0 && !(as = io::parse_double(f[as_i]))) { ++out.skipped; continue; }
    s.timestamps.push_back(detail::check_order(*t, last, schema.regression_tolerance_ms, lineno));
    s.bids.push_back(*b);
    s.asks.push_back(*a);
    if (bs) s.bid_sizes.push_back(*bs);
    if (as) s.ask_sizes.push_back(*as);
    if (c_i >= 0) {
      auto code = f[c_i];
      bool ok = std::find(schema.regular_conditions.begin(), schema.regular_conditions.end(), code) !=
                schema.regular_conditions.end();
      s.irregular.push_back(ok ? 0 : 1);
    }
  }
  if (s.empty()) throw InputError("zero parseable rows (" + std::to_string(out.skipped) + " skipped)");
  return out;
}

inline ParseResult<QuoteSeries> parse_quotes(const std::filesystem::path& path, const QuoteSchema& schema) {
  auto in = detail::open_or_throw(path);
  try {
    return parse_quotes(in, schema);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// One record per distinct millisecond. Size-weighted mean price when sizes are
// present (last price if the sizes in that millisecond sum to zero), else last price.
inline TickSeries aggregate_by_millisecond(const TickSeries& in) {
  TickSeries out;
  out.instrument_id = in.instrument_id;
  const bool sized = in.has_sizes(), sided = in.has_sides();
  std::size_t i = 0;
  while (i < in.size()) {
    std::size_t j = i;
    while (j + 1 < in.size() && in.timestamps[j + 1] == in.timestamps[i]) ++j;
    double price = in.prices[j];
    double total = 0;
    if (sized) {
      double wsum = 0;
      for (std::size_t k = i; k <= j; ++k) {
        total += in.sizes[k];
        wsum += in.sizes[k] * in.prices[k];
      }
      if (j > i && total > 0) price = wsum / total;
      else if (j == i) total = in.sizes[i];
    }
    out.timestamps.push_back(in.timestamps[i]);
    out.prices.push_back(price);
    if (sized) out.sizes.push_back(total);
    if (sided) {
      Side s = in.sides[i];
      for (std::size_t k = i + 1; k <= j; ++k)
        if (in.sides[k] != s) s = Side::unknown;
      out.sides.push_back(s);
    }
    i = j + 1;
  }
  return out;
}

inline TickSeries mid_quote(const QuoteSeries& q) {
  TickSeries out;
  out.instrument_id = q.instrument_id;
  out.timestamps = q.timestamps;
  out.prices.resize(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q.asks[i] < q.bids[i])
      throw InputError("mid_quote: crossed quote at index " + std::to_string(i) + " (run cleaning first)");
    out.prices[i] = 0.5 * (q.bids[i] + q.asks[i]);
  }
  return out;
}

struct ClipResult {
  TickSeries series;
  bool empty = false;
};

// Series timestamps are relative to the session start, so the window keeps [0, length].
inline ClipResult clip_session(const TickSeries& in, const SessionWindow& w) {
  ClipResult r;
  r.series.instrument_id = in.instrument_id;
  const std::int64_t hi = w.length_ms();
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto t = in.timestamps[i];
    if (t < 0 || t > hi) continue;
    r.series.timestamps.push_back(t);
    r.series.prices.push_back(in.prices[i]);
    if (in.has_sizes()) r.series.sizes.push_back(in.sizes[i]);
    if (in.has_sides()) r.series.sides.push_back(in.sides[i]);
  }
  r.empty = r.series.empty();
  return r;
}

inline QuoteSeries clip_session(const QuoteSeries& in, const SessionWindow& w) {
  QuoteSeries r;
  r.instrument_id = in.instrument_id;
  const std::int64_t hi = w.length_ms();
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto t = in.timestamps[i];
    if (t < 0 || t > hi) continue;
    r.timestamps.push_back(t);
    r.bids.push_back(in.bids[i]);
    r.asks.push_back(in.asks[i]);
    if (!in.bid_sizes.empty()) r.bid_sizes.push_back(in.bid_sizes[i]);
    if (!in.ask_sizes.empty()) r.ask_sizes.push_back(in.ask_sizes[i]);
    if (!in.irregular.empty()) r.irregular.push_back(in.irregular[i]);
  }
  return r;
}

// Previous-tick log prices at start, start+step, ..., start+count*step.
// Boundaries before the first tick take the first tick's price.
inline std::vector<double> previous_tick_sample(const TickSeries& s, std::int64_t start, std::int64_t step,
                                                std::size_t count) {
  if (s.empty()) throw InputError("previous_tick_sample: empty series");
  if (step <= 0) throw ConfigError("previous_tick_sample: step must be positive");
  std::vector<double> out(count + 1);
  std::size_t j = 0;
  for (std::size_t k = 0; k <= count; ++k) {
    std::int64_t b = start + static_cast<std::int64_t>(k) * step;
    while (j + 1 < s.size() && s.timestamps[j + 1] <= b) ++j;
    out[k] = std::log(s.prices[j]);
  }
  return out;
}

} // namespace jumpvar
