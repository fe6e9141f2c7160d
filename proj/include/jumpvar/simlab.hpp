#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "jumpvar/error.hpp"
#include "jumpvar/marketdata.hpp"
#include "jumpvar/rng.hpp"

namespace jumpvar {

enum class Model { BM, SV_HESTON, SV2F_LEV, BMJ, BMO, BURST };

inline const char* to_string(Model m) {
  switch (m) {
  case Model::BM: return "BM";
  case Model::SV_HESTON: return "SV";
  case Model::SV2F_LEV: return "SV2F-LEV";
  case Model::BMJ: return "BMJ";
  case Model::BMO: return "BMO";
  case Model::BURST: return "BURST";
  }
  return "?";
}

inline Model parse_model(std::string_view s) {
  if (s == "BM" || s == "bm") return Model::BM;
  if (s == "SV" || s == "sv" || s == "SV_HESTON" || s == "heston") return Model::SV_HESTON;
  if (s == "SV2F-LEV" || s == "SV2F_LEV" || s == "sv2f") return Model::SV2F_LEV;
  if (s == "BMJ" || s == "bmj") return Model::BMJ;
  if (s == "BMO" || s == "bmo") return Model::BMO;
  if (s == "BURST" || s == "burst") return Model::BURST;
  throw ConfigError("unknown model '" + std::string(s) + "'");
}

// Time unit is one trading day; variances are per day in log-price units.
struct HestonParams {
  double kappa = 5.0;
  double vbar = 0.0391;
  double xi = 0.5;
  double rho = -0.5;
  double v0 = -1.0; // negative: draw from the stationary Gamma law
  int substeps = 1;
};

struct Sv2fParams {
  double beta0 = -1.2, beta1 = 0.04, beta2 = 1.5;
  double alpha1 = -0.00137, alpha2 = -1.386;
  double beta_phi = 0.25;
  double rho1 = -0.3, rho2 = -0.3;
  double mu = 0.0;
  double scale = 0.01; // percent to log units
  int substeps = 1;
};

struct BurstParams {
  double sigma_star2 = 0.16 / 252.0; // 40% annualized
  double multiplier = 3.0;
  double start = 16.0 / 32.0;
  double end = 17.0 / 32.0;
};

struct ModelParams {
  double sigma2 = 0.0391;    // BM, BMJ, BMO
  double jump_share = 0.20;  // BMJ/BMO: share of mean total variation
  HestonParams heston;
  Sv2fParams sv2f;
  BurstParams burst;
};

struct NoiseSpec {
  double gamma = 0.0;
  std::optional<double> omega2; // overrides gamma when set
  double beta = 0.0;
  std::optional<std::uint64_t> seed; // defaults to the path seed

  bool active() const { return gamma > 0 || (omega2 && *omega2 > 0); }
  void validate() const {
    if (gamma < 0) throw ConfigError("noise: gamma must be non-negative");
    if (omega2 && *omega2 < 0) throw ConfigError("noise: omega2 must be non-negative");
    if (!(std::abs(beta) < 1)) throw ConfigError("noise: |beta| must be below 1");
  }
};

struct RoundingSpec {
  double tick = 0.01;
  double level = 50.0;
};

struct SimSpec {
  Model model = Model::BM;
  ModelParams params;
  std::size_t N = 40000;
  NoiseSpec noise;
  std::optional<RoundingSpec> rounding;
  std::uint64_t seed = 1;
  std::uint64_t path_id = 0;
  std::size_t edge_margin = 0;           // 0: automatic interior margin for jumps/outliers
  std::function<double(double)> time_map; // sampling times t_i = f(i/N); empty means uniform
};

struct SimPath {
  std::vector<double> efficient_log_prices;
  std::vector<double> observed_log_prices;
  std::vector<double> noise;
  double true_iv = 0;
  double true_jv_sum = 0;
  double omega2 = 0;
  std::vector<std::size_t> jump_times;
  std::vector<double> jump_sizes;
  std::vector<std::size_t> outlier_times;
  std::vector<double> outlier_sizes;
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  bool rounded = false;

  std::size_t N() const { return efficient_log_prices.empty() ? 0 : efficient_log_prices.size() - 1; }
};

namespace detail {

inline double sexp(double x) {
  const double x0 = std::log(1.5);
  if (x <= x0) return std::exp(x);
  return std::exp(x0) / std::sqrt(x0) * std::sqrt(x0 - x0 * x0 + x * x);
}

inline std::size_t auto_margin(std::size_t N) {
  auto m = static_cast<std::size_t>(std::ceil(5.0 * std::sqrt(static_cast<double>(N))));
  return std::max<std::size_t>(1, std::min(m, N / 4));
}

inline void validate(const SimSpec& s) {
  if (s.N < 2) throw ConfigError("simulate: N must be at least 2");
  const auto& p = s.params;
  if (p.sigma2 < 0) throw ConfigError("simulate: sigma2 must be non-negative");
  if (!(p.jump_share >= 0 && p.jump_share < 1)) throw ConfigError("simulate: jump share must lie in [0,1)");
  const auto& h = p.heston;
  if (h.kappa < 0) throw ConfigError("simulate: negative mean reversion");
  if (h.vbar < 0 || h.xi < 0) throw ConfigError("simulate: Heston variance parameters must be non-negative");
  if (std::abs(h.rho) > 1) throw ConfigError("simulate: |rho| must not exceed 1");
  if (h.substeps < 1 || p.sv2f.substeps < 1) throw ConfigError("simulate: substeps must be positive");
  const auto& v = p.sv2f;
  if (v.alpha1 >= 0 || v.alpha2 >= 0) throw ConfigError("simulate: SV2F mean reversion must be negative");
  if (v.rho1 * v.rho1 + v.rho2 * v.rho2 > 1) throw ConfigError("simulate: SV2F correlations too large");
  if (p.burst.sigma_star2 < 0 || p.burst.multiplier < 0) throw ConfigError("simulate: burst variance must be non-negative");
  s.noise.validate();
  if (s.rounding && (!(s.rounding->tick > 0) || !(s.rounding->level > 0)))
    throw ConfigError("simulate: rounding tick and level must be positive");
}

inline std::vector<double> sample_times(const SimSpec& s) {
  std::vector<double> t(s.N + 1);
  for (std::size_t i = 0; i <= s.N; ++i) {
    double u = static_cast<double>(i) / static_cast<double>(s.N);
    t[i] = s.time_map ? s.time_map(u) : u;
  }
  for (std::size_t i = 1; i <= s.N; ++i)
    if (t[i] < t[i - 1]) throw ConfigError("simulate: time map must be non-decreasing");
  return t;
}

// Signed size with E(J^2) = share/(1-share) * mean_iv.
inline double spike_size(CounterRng& rng, double share, double mean_iv) {
  double mag = std::abs(rng.normal()) * std::sqrt(share / (1.0 - share) * mean_iv);
  return rng.uniform() < 0.5 ? -mag : mag;
}

} // namespace detail

inline void add_noise_inplace(SimPath& p, const NoiseSpec& noise) {
  noise.validate();
  const std::size_t n = p.efficient_log_prices.size();
  p.noise.assign(n, 0.0);
  p.omega2 = 0;
  if (noise.active()) {
    double w2 = 0;
    if (noise.omega2) {
      w2 = *noise.omega2;
    } else {
      if (!(p.true_iv > 0)) throw ComputationError("add_noise: gamma mode needs a path with positive integrated variance");
      w2 = noise.gamma * noise.gamma * p.true_iv / static_cast<double>(p.N());
    }
    p.omega2 = w2;
    CounterRng rng(noise.seed.value_or(p.seed), stream::noise, p.path_id);
    const double innov = std::sqrt(w2 * (1.0 - noise.beta * noise.beta));
    double u = std::sqrt(w2) * rng.normal();
    p.noise[0] = u;
    for (std::size_t i = 1; i < n; ++i) {
      u = noise.beta * u + innov * rng.normal();
      p.noise[i] = u;
    }
  }
  p.observed_log_prices = p.efficient_log_prices;
  if (noise.active())
    for (std::size_t i = 0; i < n; ++i) p.observed_log_prices[i] += p.noise[i];
  for (std::size_t k = 0; k < p.outlier_times.size(); ++k) p.observed_log_prices[p.outlier_times[k]] += p.outlier_sizes[k];
  p.rounded = false;
}

// Rebuilds the observed path from efficient prices, fresh noise and the stored outliers.
inline SimPath add_noise(SimPath p, const NoiseSpec& noise) {
  add_noise_inplace(p, noise);
  return p;
}

inline SimPath round_to_grid(SimPath p, double tick, double level) {
  if (!(tick > 0) || !(level > 0)) throw ConfigError("round_to_grid: tick and level must be positive");
  const double x0 = p.efficient_log_prices.front();
  for (auto& y : p.observed_log_prices) {
    double px = level * std::exp(y - x0);
    double r = std::round(px / tick) * tick;
    if (!(r > 0)) throw ComputationError("round_to_grid: price rounds to zero");
    y = std::log(r / level) + x0;
  }
  p.rounded = true;
  return p;
}

inline SimPath simulate(const SimSpec& spec) {
  detail::validate(spec);
  const std::size_t N = spec.N;
  const auto& par = spec.params;
  SimPath p;
  p.seed = spec.seed;
  p.path_id = spec.path_id;
  auto t = detail::sample_times(spec);
  std::vector<double> x(N + 1, 0.0);
  CounterRng zp(spec.seed, stream::price, spec.path_id);
  double iv = 0;
  double mean_iv = 0;

  switch (spec.model) {
  case Model::BM:
  case Model::BMJ:
  case Model::BMO: {
    for (std::size_t i = 1; i <= N; ++i) {
      double dt = t[i] - t[i - 1];
      x[i] = x[i - 1] + std::sqrt(par.sigma2 * dt) * zp.normal();
    }
    iv = par.sigma2 * (t[N] - t[0]);
    mean_iv = iv;
    break;
  }
  case Model::BURST: {
    const auto& b = par.burst;
    for (std::size_t i = 1; i <= N; ++i) {
      double dt = t[i] - t[i - 1];
      double s2 = b.sigma_star2;
      if (t[i - 1] >= b.start && t[i - 1] < b.end) s2 *= b.multiplier * b.multiplier;
      x[i] = x[i - 1] + std::sqrt(s2 * dt) * zp.normal();
      iv += s2 * dt;
    }
    break;
  }
  case Model::SV_HESTON: {
    const auto& h = par.heston;
    CounterRng zv(spec.seed, stream::volatility, spec.path_id);
    CounterRng zi(spec.seed, stream::init, spec.path_id);
    double v = h.v0;
    if (v < 0) {
      if (h.xi > 0 && h.kappa > 0) {
        double shape = 2.0 * h.kappa * h.vbar / (h.xi * h.xi);
        double scale = h.xi * h.xi / (2.0 * h.kappa);
        v = shape > 0 ? zi.gamma(shape) * scale : 0.0;
      } else {
        v = h.vbar;
      }
    }
    const double rc = std::sqrt(std::max(0.0, 1.0 - h.rho * h.rho));
    for (std::size_t i = 1; i <= N; ++i) {
      const double dt = (t[i] - t[i - 1]) / h.substeps;
      double xi_ = x[i - 1];
      for (int k = 0; k < h.substeps; ++k) {
        const double vp = std::max(v, 0.0);
        const double z1 = zp.normal();
        const double z2 = h.rho * z1 + rc * zv.normal();
        xi_ += std::sqrt(vp * dt) * z1;
        iv += vp * dt;
        v += h.kappa * (h.vbar - vp) * dt + h.xi * std::sqrt(vp * dt) * z2;
      }
      x[i] = xi_;
    }
    break;
  }
  case Model::SV2F_LEV: {
    const auto& s = par.sv2f;
    CounterRng zv(spec.seed, stream::volatility, spec.path_id);
    CounterRng zi(spec.seed, stream::init, spec.path_id);
    double v1 = std::sqrt(-1.0 / (2.0 * s.alpha1)) * zi.normal();
    double v2 = std::sqrt(-1.0 / (2.0 * s.alpha2)) * zi.normal();
    const double rc = std::sqrt(std::max(0.0, 1.0 - s.rho1 * s.rho1 - s.rho2 * s.rho2));
    for (std::size_t i = 1; i <= N; ++i) {
      const double dt = (t[i] - t[i - 1]) / s.substeps;
      double xi_ = x[i - 1];
      for (int k = 0; k < s.substeps; ++k) {
        const double sig = s.scale * detail::sexp(s.beta0 + s.beta1 * v1 + s.beta2 * v2);
        const double w1 = zv.normal(), w2 = zv.normal();
        const double w = s.rho1 * w1 + s.rho2 * w2 + rc * zp.normal();
        const double sq = std::sqrt(dt);
        xi_ += s.mu * s.scale * dt + sig * sq * w;
        iv += sig * sig * dt;
        v1 += s.alpha1 * v1 * dt + sq * w1;
        v2 += s.alpha2 * v2 * dt + (1.0 + s.beta_phi * v2) * sq * w2;
      }
      x[i] = xi_;
    }
    break;
  }
  }
  p.true_iv = iv;

  if (spec.model == Model::BMJ || spec.model == Model::BMO) {
    const std::size_t m = spec.edge_margin ? spec.edge_margin : detail::auto_margin(N);
    if (2 * m > N) throw ConfigError("simulate: edge margin leaves no interior");
    if (spec.model == Model::BMJ) {
      CounterRng zj(spec.seed, stream::jump, spec.path_id);
      auto at = static_cast<std::size_t>(zj.uniform_index(m, N - m));
      double J = detail::spike_size(zj, par.jump_share, mean_iv);
      for (std::size_t i = at; i <= N; ++i) x[i] += J;
      p.jump_times.push_back(at);
      p.jump_sizes.push_back(J);
      p.true_jv_sum = J * J;
    } else {
      CounterRng zo(spec.seed, stream::outlier, spec.path_id);
      auto at = static_cast<std::size_t>(zo.uniform_index(m, N - m));
      p.outlier_times.push_back(at);
      p.outlier_sizes.push_back(detail::spike_size(zo, par.jump_share, mean_iv));
    }
  }
  p.efficient_log_prices = std::move(x);
  add_noise_inplace(p, spec.noise);
  if (spec.rounding) p = round_to_grid(std::move(p), spec.rounding->tick, spec.rounding->level);
  return p;
}

// Ticks evenly spread over a session of the given length; prices scaled to `level`.
inline TickSeries to_tick_series(const SimPath& p, const std::string& instrument, std::int64_t session_ms,
                                 double level = 50.0) {
  const std::size_t n = p.observed_log_prices.size();
  std::vector<std::int64_t> ts(n);
  const double N = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    ts[i] = static_cast<std::int64_t>(std::llround(static_cast<double>(session_ms) * static_cast<double>(i) / N));
  const double x0 = p.efficient_log_prices.front();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::log(level) + (p.observed_log_prices[i] - x0);
  return TickSeries::from_log_prices(instrument, std::move(ts), y);
}

} // namespace jumpvar
