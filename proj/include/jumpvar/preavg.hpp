#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "jumpvar/error.hpp"
#include "jumpvar/marketdata.hpp"
#include "jumpvar/weight_function.hpp"

namespace jumpvar {

struct PreAvgConfig {
  double theta = 1.0;
  WeightFunction weight = WeightFunction::triangular();
  double alpha = 0.999;
  double varpi = 0.20;
  int max_truncation_iterations = 50;

  void validate() const {
    if (!(theta > 0)) throw ConfigError("theta must be positive");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0,1)");
    if (!(varpi > 0 && varpi < 0.25)) throw ConfigError("varpi must lie in (0,0.25)");
    if (max_truncation_iterations < 1) throw ConfigError("truncation iteration cap must be positive");
  }
};

// K = max(2, 2 round(theta sqrt(N) / 2)).
inline int window_K(double theta, std::size_t N) {
  if (!(theta > 0)) throw ConfigError("theta must be positive");
  double half = std::round(theta * std::sqrt(static_cast<double>(N)) / 2.0);
  return std::max(2, 2 * static_cast<int>(half));
}

inline std::vector<double> log_returns(std::span<const double> y) {
  if (y.size() < 2) throw InputError("log_returns: need at least 2 observations");
  std::vector<double> r(y.size() - 1);
  for (std::size_t i = 1; i < y.size(); ++i) r[i - 1] = y[i] - y[i - 1];
  return r;
}

inline std::vector<double> log_returns(const TickSeries& s) {
  auto y = s.log_prices();
  return log_returns(y);
}

inline double realized_variance(std::span<const double> r) {
  double s = 0;
  for (double v : r) s += v * v;
  return s;
}

inline double bipower_variation(std::span<const double> r) {
  const std::size_t N = r.size();
  if (N < 2) throw InputError("bipower_variation: need at least 2 returns");
  double s = 0;
  for (std::size_t i = 1; i < N; ++i) s += std::abs(r[i - 1]) * std::abs(r[i]);
  const double Nd = static_cast<double>(N);
  return (Nd / (Nd - 1.0)) * (std::numbers::pi / 2.0) * s;
}

inline double noise_variance_ac(std::span<const double> r) {
  const std::size_t N = r.size();
  if (N < 2) throw InputError("noise_variance_ac: need at least 2 returns");
  double s = 0;
  for (std::size_t i = 1; i < N; ++i) s += r[i] * r[i - 1];
  return -s / static_cast<double>(N - 1);
}

// r*_i for i = 0..N-K+1 over log prices y_0..y_N.
inline std::vector<double> preavg_returns(std::span<const double> y, int K,
                                          const WeightFunction& g = WeightFunction::triangular()) {
  if (K < 2 || K % 2 != 0) throw ConfigError("preavg_returns: K must be even and at least 2");
  if (static_cast<std::size_t>(K) > y.size()) throw InputError("preavg_returns: K exceeds the number of observations");
  const std::size_t n_out = y.size() - static_cast<std::size_t>(K) + 1;
  std::vector<double> out(n_out);
  if (g.is_triangular()) {
    // Prefix sums of prices centred on y_0, in extended precision.
    std::vector<long double> S(y.size() + 1, 0.0L);
    for (std::size_t i = 0; i < y.size(); ++i) S[i + 1] = S[i] + (static_cast<long double>(y[i]) - y[0]);
    const std::size_t h = static_cast<std::size_t>(K) / 2, k = static_cast<std::size_t>(K);
    for (std::size_t i = 0; i < n_out; ++i) {
      long double second = S[i + k] - S[i + h];
      long double first = S[i + h] - S[i];
      out[i] = static_cast<double>((second - first) / static_cast<long double>(K));
    }
    return out;
  }
  std::vector<double> w(static_cast<std::size_t>(K));
  for (int j = 1; j < K; ++j) w[j] = g(static_cast<double>(j) / K);
  for (std::size_t i = 0; i < n_out; ++i) {
    double s = 0;
    for (int j = 1; j < K; ++j) s += w[j] * (y[i + j] - y[i + j - 1]);
    out[i] = s;
  }
  return out;
}

namespace detail {

struct PreAvgScales {
  int K = 2;
  double psi1K = 1.0;
  double psi2K = 0.125;
};

inline PreAvgScales scales(const PreAvgConfig& cfg, int K) {
  PreAvgScales s;
  s.K = K;
  if (cfg.weight.is_triangular()) {
    s.psi1K = 1.0;
    s.psi2K = psi_K(K);
  } else {
    auto c = weight_constants(cfg.weight, K);
    s.psi1K = c.psi1_K;
    s.psi2K = c.psi2_K;
  }
  return s;
}

inline double bias_term(double omega2, const PreAvgConfig& cfg, const PreAvgScales& s) {
  return omega2 * s.psi1K / (cfg.theta * cfg.theta * s.psi2K);
}

inline double rv_from(std::span<const double> rs, std::size_t N, const PreAvgConfig& cfg, const PreAvgScales& s,
                      double omega2) {
  double sum = 0;
  for (double v : rs) sum += v * v;
  const double Nd = static_cast<double>(N);
  return (Nd / (Nd - s.K + 2.0)) * (1.0 / (s.K * s.psi2K)) * sum - bias_term(omega2, cfg, s);
}

inline double bv_from(std::span<const double> rs, std::size_t N, const PreAvgConfig& cfg, const PreAvgScales& s,
                      double omega2) {
  const std::size_t K = static_cast<std::size_t>(s.K);
  double sum = 0;
  for (std::size_t i = 0; i + K < rs.size(); ++i) sum += std::abs(rs[i]) * std::abs(rs[i + K]);
  const double Nd = static_cast<double>(N);
  return (Nd / (Nd - 2.0 * s.K + 2.0)) * (1.0 / (s.K * s.psi2K)) * (std::numbers::pi / 2.0) * sum -
         bias_term(omega2, cfg, s);
}

inline double clamped_noise(std::span<const double> y) {
  auto r = log_returns(y);
  return std::max(0.0, noise_variance_ac(r));
}

inline void require_length(std::size_t n_obs, std::size_t need, const char* what) {
  if (n_obs < need)
    throw InputError(std::string(what) + ": series too short for the chosen theta (" + std::to_string(n_obs) +
                     " observations, need " + std::to_string(need) + ")");
}

} // namespace detail

inline double preavg_rv(std::span<const double> y, const PreAvgConfig& cfg) {
  cfg.validate();
  if (y.size() < 3) throw InputError("preavg_rv: need at least 3 observations");
  const std::size_t N = y.size() - 1;
  const int K = window_K(cfg.theta, N);
  detail::require_length(y.size(), static_cast<std::size_t>(K) + 2, "preavg_rv");
  auto rs = preavg_returns(y, K, cfg.weight);
  return detail::rv_from(rs, N, cfg, detail::scales(cfg, K), detail::clamped_noise(y));
}

inline double preavg_bv(std::span<const double> y, const PreAvgConfig& cfg) {
  cfg.validate();
  if (y.size() < 3) throw InputError("preavg_bv: need at least 3 observations");
  const std::size_t N = y.size() - 1;
  const int K = window_K(cfg.theta, N);
  detail::require_length(y.size(), 2 * static_cast<std::size_t>(K) + 2, "preavg_bv");
  auto rs = preavg_returns(y, K, cfg.weight);
  return detail::bv_from(rs, N, cfg, detail::scales(cfg, K), detail::clamped_noise(y));
}

inline double preavg_rv(const TickSeries& s, const PreAvgConfig& cfg) { return preavg_rv(s.log_prices(), cfg); }
inline double preavg_bv(const TickSeries& s, const PreAvgConfig& cfg) { return preavg_bv(s.log_prices(), cfg); }

inline double normal_quantile(double p) {
  if (!(p > 0 && p < 1)) throw ConfigError("quantile level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

// tau = q_alpha N^-varpi sqrt(psi2K theta sigma2 + psi1K omega2 / theta), with an explicit window K.
inline double threshold_tau(double omega2, double sigma2, const PreAvgConfig& cfg, std::size_t N, int K) {
  if (sigma2 < 0 || omega2 < 0) throw ConfigError("threshold_tau: variances must be non-negative");
  auto s = detail::scales(cfg, K);
  const double q = normal_quantile(cfg.alpha);
  return q / std::pow(static_cast<double>(N), cfg.varpi) *
         std::sqrt(s.psi2K * cfg.theta * sigma2 + s.psi1K * omega2 / cfg.theta);
}

inline double threshold_tau(double omega2, double sigma2, const PreAvgConfig& cfg, std::size_t N) {
  return threshold_tau(omega2, sigma2, cfg, N, window_K(cfg.theta, N));
}

struct TruncationResult {
  double bv_star_tau = 0;
  int iterations = 0;
  std::size_t returns_removed = 0;
  std::size_t final_n_obs = 0;
};

// Iterative spike removal. K stays at the value implied by the original sample size.
inline TruncationResult truncated_preavg_bv(std::span<const double> y0, const PreAvgConfig& cfg) {
  cfg.validate();
  if (y0.size() < 3) throw InputError("truncated_preavg_bv: need at least 3 observations");
  const int K = window_K(cfg.theta, y0.size() - 1);
  const std::size_t Ku = static_cast<std::size_t>(K);
  detail::require_length(y0.size(), 2 * Ku + 2, "truncated_preavg_bv");
  const auto sc = detail::scales(cfg, K);

  std::vector<double> y(y0.begin(), y0.end());
  TruncationResult res;
  for (;;) {
    const std::size_t N = y.size() - 1;
    auto rs = preavg_returns(y, K, cfg.weight);
    const double omega2 = detail::clamped_noise(y);
    const double bv = detail::bv_from(rs, N, cfg, sc, omega2);
    const double tau = threshold_tau(omega2, std::max(0.0, bv), cfg, N, K);

    std::vector<std::size_t> kill;
    std::size_t breaches = 0;
    std::size_t i = 0;
    while (i < rs.size()) {
      if (!(std::abs(rs[i]) > tau)) { ++i; continue; }
      std::size_t a = i;
      while (i < rs.size() && std::abs(rs[i]) > tau) ++i;
      std::size_t b = i - 1;
      breaches += b - a + 1;
      // Windows a..b use prices y_a..y_{b+K-1}; returns are indexed by their later price.
      std::size_t best = a + 1;
      double best_abs = -1;
      for (std::size_t t = a + 1; t <= b + Ku - 1; ++t) {
        double v = std::abs(y[t] - y[t - 1]);
        if (v > best_abs) { best_abs = v; best = t; }
      }
      kill.push_back(best);
    }
    if (kill.empty()) {
      res.bv_star_tau = bv;
      res.final_n_obs = y.size();
      return res;
    }
    if (res.iterations >= cfg.max_truncation_iterations)
      throw ComputationError("truncation did not terminate after " + std::to_string(res.iterations) +
                             " iterations (" + std::to_string(breaches) + " breaches left, tau=" + io::fmt(tau) +
                             ", n_obs=" + std::to_string(y.size()) + ")");
    std::sort(kill.begin(), kill.end());
    kill.erase(std::unique(kill.begin(), kill.end()), kill.end());
    if (y.size() - kill.size() < 2 * Ku + 2)
      throw ComputationError("truncation removed too many returns for window K=" + std::to_string(K));

    std::vector<double> next;
    next.reserve(y.size() - kill.size());
    next.push_back(y[0]);
    double offset = 0;
    std::size_t kp = 0;
    for (std::size_t t = 1; t < y.size(); ++t) {
      if (kp < kill.size() && kill[kp] == t) {
        offset += y[t] - y[t - 1];
        ++kp;
        continue;
      }
      next.push_back(y[t] - offset);
    }
    res.returns_removed += kill.size();
    y.swap(next);
    ++res.iterations;
  }
}

inline TruncationResult truncated_preavg_bv(const TickSeries& s, const PreAvgConfig& cfg) {
  return truncated_preavg_bv(s.log_prices(), cfg);
}

inline double jump_variation(double rv_hat, double iv_hat) {
  if (!(rv_hat > 0)) throw ComputationError("jump_variation: rv must be positive");
  return (rv_hat - iv_hat) / rv_hat;
}

inline double noise_ratio(double omega2, double iv_hat, std::size_t N) {
  if (!(iv_hat > 0)) throw ComputationError("noise_ratio: iv must be positive");
  if (omega2 < 0) throw ConfigError("noise_ratio: omega2 must be non-negative");
  return std::sqrt(static_cast<double>(N) * omega2 / iv_hat);
}

inline double annualized_vol(double daily_variance, double days = 252.0) {
  return std::sqrt(days * std::max(0.0, daily_variance));
}

struct VariationReport {
  double rv = 0, bv = 0;
  double rv_star = 0, bv_star = 0, bv_star_tau = 0;
  double omega2_hat = 0;
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  double jv = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_obs = 0;
  int K = 0;
  int truncation_iterations = 0;
};

// Tick-level report: JV from RV* and BV*_tau, gamma from the clamped noise estimate and BV*_tau.
inline VariationReport variation_report(std::span<const double> y, const PreAvgConfig& cfg) {
  VariationReport rep;
  rep.n_obs = y.size();
  auto r = log_returns(y);
  rep.rv = realized_variance(r);
  rep.bv = bipower_variation(r);
  rep.omega2_hat = noise_variance_ac(r);
  rep.K = window_K(cfg.theta, r.size());
  rep.rv_star = preavg_rv(y, cfg);
  rep.bv_star = preavg_bv(y, cfg);
  auto tr = truncated_preavg_bv(y, cfg);
  rep.bv_star_tau = tr.bv_star_tau;
  rep.truncation_iterations = tr.iterations;
  if (rep.rv_star > 0) rep.jv = jump_variation(rep.rv_star, rep.bv_star_tau);
  if (rep.bv_star_tau > 0) rep.gamma_hat = noise_ratio(std::max(0.0, rep.omega2_hat), rep.bv_star_tau, r.size());
  return rep;
}

inline VariationReport variation_report(const TickSeries& s, const PreAvgConfig& cfg) {
  return variation_report(s.log_prices(), cfg);
}

// Coarse-grid report: only the plain estimators apply; JV from RV and BV.
inline VariationReport coarse_report(std::span<const double> y) {
  VariationReport rep;
  rep.n_obs = y.size();
  auto r = log_returns(y);
  rep.rv = realized_variance(r);
  rep.bv = bipower_variation(r);
  rep.omega2_hat = noise_variance_ac(r);
  rep.rv_star = rep.bv_star = rep.bv_star_tau = std::numeric_limits<double>::quiet_NaN();
  if (rep.rv > 0) rep.jv = jump_variation(rep.rv, rep.bv);
  return rep;
}

} // namespace jumpvar
