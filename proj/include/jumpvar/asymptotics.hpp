#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "jumpvar/error.hpp"
#include "jumpvar/io.hpp"
#include "jumpvar/parallel.hpp"
#include "jumpvar/rng.hpp"
#include "jumpvar/weight_function.hpp"

namespace jumpvar {

namespace detail {

// w(u) = int_0^{1-u} f(y) f(y+u) dy, split at the kinks of both factors.
inline double lag_product(const std::function<double(double)>& f, const std::vector<double>& kinks, double u) {
  if (u >= 1.0) return 0.0;
  if (u < 0.0) throw ConfigError("lag must lie in [0,1]");
  std::vector<double> cuts;
  for (double b : kinks) {
    cuts.push_back(b);
    cuts.push_back(b - u);
  }
  return integrate_piecewise([&](double y) { return f(y) * f(y + u); }, 0.0, 1.0 - u, cuts);
}

} // namespace detail

inline double w_g(const WeightFunction& g, double u) { return detail::lag_product(g.g(), g.kinks(), u); }

inline double w_g_prime(const WeightFunction& g, double u) {
  return detail::lag_product(g.g_prime(), g.kinks(), u);
}

struct SigmaStar {
  double s11 = 0, s12 = 0, s22 = 0;
  // Largest relative gap between the sampled and exact covariance of squares.
  double f11_sampling_gap = 0;

  double operator()(int i, int j) const {
    if (i == 0 && j == 0) return s11;
    if (i == 1 && j == 1) return s22;
    return s12;
  }
  double correlation() const { return s12 / std::sqrt(s11 * s22); }
};

struct SigmaStarOptions {
  std::size_t mc_draws = 200000;
  std::uint64_t seed = 0x5eed5eedULL;
  unsigned jobs = 1;
};

namespace detail {

// Lower-triangular factor of a 4x4 covariance; throws when it is not positive semidefinite.
inline std::array<std::array<double, 4>, 4> cholesky4(const std::array<std::array<double, 4>, 4>& a,
                                                      const std::string& where) {
  std::array<std::array<double, 4>, 4> L{};
  double scale = 0;
  for (int i = 0; i < 4; ++i) scale = std::max(scale, std::abs(a[i][i]));
  const double eps = 1e-12 * std::max(scale, 1e-300);
  for (int j = 0; j < 4; ++j) {
    double d = a[j][j];
    for (int k = 0; k < j; ++k) d -= L[j][k] * L[j][k];
    if (d < -eps) throw ComputationError("sigma_star: covariance not positive semidefinite at " + where);
    L[j][j] = d > eps ? std::sqrt(d) : 0.0;
    for (int i = j + 1; i < 4; ++i) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      if (L[j][j] > 0) L[i][j] = s / L[j][j];
      else if (std::abs(s) > eps) throw ComputationError("sigma_star: covariance not positive semidefinite at " + where);
    }
  }
  return L;
}

struct NodeF {
  double f11 = 0, f12 = 0, f22 = 0, f11_mc = 0;
};

} // namespace detail

// Sigma* = 1/(theta psi2^2) sum_{l=-1..2} int int F_{l, sigma_s, u} ds du.
// S=(S1,S2) and T=(T1,T2) are jointly normal with cov(S_a, T_b) = c(|b - a + l - 1 + u|),
// c(v) = theta w_g(v) x^2 + w_g'(v) omega2 / theta for v < 1 and 0 beyond.
inline SigmaStar sigma_star(const std::function<double(double)>& spot_var, double omega2, double theta,
                            const WeightFunction& g, const SigmaStarOptions& opt = {}) {
  if (!(theta > 0)) throw ConfigError("sigma_star: theta must be positive");
  if (omega2 < 0) throw ConfigError("sigma_star: omega2 must be non-negative");
  if (opt.mc_draws < 2) throw ConfigError("sigma_star: need at least 2 draws per node");
  using GL = boost::math::quadrature::gauss<double, 32>;
  auto gl_nodes = [](double a, double b, std::vector<double>& xs, std::vector<double>& ws) {
    const auto& ab = GL::abscissa();
    const auto& wt = GL::weights();
    const double h = 0.5 * (b - a), m = 0.5 * (a + b);
    for (std::size_t k = 0; k < ab.size(); ++k) {
      xs.push_back(m + h * ab[k]);
      ws.push_back(h * wt[k]);
      if (ab[k] != 0.0) {
        xs.push_back(m - h * ab[k]);
        ws.push_back(h * wt[k]);
      }
    }
  };
  std::vector<double> nodes, weights;
  gl_nodes(0.0, 1.0, nodes, weights);
  // Lags where w_g or w_g' can kink: kink positions, their mirrors and pairwise gaps.
  std::vector<double> cuts = {0.0, 1.0};
  for (double b : g.kinks()) {
    cuts.push_back(b);
    cuts.push_back(1.0 - b);
    for (double c : g.kinks()) cuts.push_back(std::abs(b - c));
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> unodes, uweights;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
    if (cuts[k + 1] - cuts[k] > 1e-12) gl_nodes(cuts[k], cuts[k + 1], unodes, uweights);
  const std::size_t nn = nodes.size();
  const std::size_t nu = unodes.size();
  std::vector<double> x2(nn);
  for (std::size_t k = 0; k < nn; ++k) {
    x2[k] = spot_var(nodes[k]);
    if (!(x2[k] >= 0) || !std::isfinite(x2[k])) throw ConfigError("sigma_star: spot variance must be finite and >= 0");
  }
  const double psi1 = g.psi1(), psi2 = g.psi2();
  std::vector<double> wg_u(nu), wg_1u(nu), wp_u(nu), wp_1u(nu);
  for (std::size_t k = 0; k < nu; ++k) {
    wg_u[k] = w_g(g, unodes[k]);
    wg_1u[k] = w_g(g, 1.0 - unodes[k]);
    wp_u[k] = w_g_prime(g, unodes[k]);
    wp_1u[k] = w_g_prime(g, 1.0 - unodes[k]);
  }
  constexpr double mu2 = 2.0 / std::numbers::pi;
  const std::size_t n = opt.mc_draws;

  struct TaskOut {
    double f11 = 0, f12 = 0, f22 = 0, gap = 0;
  };
  std::vector<TaskOut> out(4 * nu);

  parallel_for(4 * nu, opt.jobs, [&](std::size_t task) {
    const int l = static_cast<int>(task / nu) - 1;
    const std::size_t ui = task % nu;
    const double u = unodes[ui];
    CounterRng rng(opt.seed, stream::quadrature, task);
    std::vector<double> z(4 * n);
    for (auto& v : z) v = rng.normal();

    std::map<double, detail::NodeF> cache;
    TaskOut acc;
    for (std::size_t si = 0; si < nn; ++si) {
      const double x = x2[si];
      auto it = cache.find(x);
      if (it == cache.end()) {
        auto c = [&](int m) {
          // lag |m + u| for integer offset m; only m = 0 and m = -1 fall inside [0,1)
          if (m == 0) return theta * wg_u[ui] * x + wp_u[ui] * omega2 / theta;
          if (m == -1) return theta * wg_1u[ui] * x + wp_1u[ui] * omega2 / theta;
          return 0.0;
        };
        const double var = theta * psi2 * x + psi1 * omega2 / theta;
        std::array<std::array<double, 4>, 4> cov{};
        for (int a = 0; a < 2; ++a) {
          cov[a][a] = var;
          cov[2 + a][2 + a] = var;
          for (int b = 0; b < 2; ++b) {
            double v = c(b - a + l - 1);
            cov[a][2 + b] = v;
            cov[2 + b][a] = v;
          }
        }
        const std::string where = "node (l=" + std::to_string(l) + ", u=" + io::fmt(u) + ", s=" + io::fmt(nodes[si]) + ")";
        auto L = detail::cholesky4(cov, where);
        double m1s = 0, m2s = 0, m1t = 0, m2t = 0;
        double s11 = 0, s12 = 0, s21 = 0, s22 = 0;
        for (std::size_t d = 0; d < n; ++d) {
          const double* e = &z[4 * d];
          double v[4];
          for (int i = 0; i < 4; ++i) {
            double s = 0;
            for (int k = 0; k <= i; ++k) s += L[i][k] * e[k];
            v[i] = s;
          }
          const double f1s = v[0] * v[0], f2s = std::abs(v[0]) * std::abs(v[1]) / mu2;
          const double f1t = v[2] * v[2], f2t = std::abs(v[2]) * std::abs(v[3]) / mu2;
          m1s += f1s; m2s += f2s; m1t += f1t; m2t += f2t;
          s11 += f1s * f1t; s12 += f1s * f2t; s21 += f2s * f1t; s22 += f2s * f2t;
        }
        const double nd = static_cast<double>(n);
        m1s /= nd; m2s /= nd; m1t /= nd; m2t /= nd;
        const double corr = nd / (nd - 1.0);
        detail::NodeF f;
        f.f11 = 2.0 * cov[0][2] * cov[0][2];
        f.f11_mc = corr * (s11 / nd - m1s * m1t);
        const double f12 = corr * (s12 / nd - m1s * m2t);
        const double f21 = corr * (s21 / nd - m2s * m1t);
        f.f12 = 0.5 * (f12 + f21);
        f.f22 = corr * (s22 / nd - m2s * m2t);
        it = cache.emplace(x, f).first;
      }
      const auto& f = it->second;
      acc.f11 += weights[si] * f.f11;
      acc.f12 += weights[si] * f.f12;
      acc.f22 += weights[si] * f.f22;
      const double scale = std::max(theta * psi2 * x + psi1 * omega2 / theta, 1e-300);
      acc.gap = std::max(acc.gap, std::abs(f.f11_mc - f.f11) / (2.0 * scale * scale));
    }
    out[task] = acc;
  });

  SigmaStar res;
  for (std::size_t task = 0; task < out.size(); ++task) {
    const double wu = uweights[task % nu];
    res.s11 += wu * out[task].f11;
    res.s12 += wu * out[task].f12;
    res.s22 += wu * out[task].f22;
    res.f11_sampling_gap = std::max(res.f11_sampling_gap, out[task].gap);
  }
  const double norm = 1.0 / (theta * psi2 * psi2);
  res.s11 *= norm;
  res.s12 *= norm;
  res.s22 *= norm;
  return res;
}

// -(1/N)(1/12) int_0^1 vov(s)^2 / sigma2(s) ds, with vov the diffusion coefficient of sigma^2.
inline double bv_bias(const std::function<double(double)>& sigma2, const std::function<double(double)>& vov,
                      std::size_t N) {
  if (N == 0) throw ConfigError("bv_bias: N must be positive");
  auto f = [&](double s) {
    double v = sigma2(s);
    if (!(v > 1e-300)) throw ComputationError("bv_bias: spot variance touches zero at s=" + io::fmt(s));
    double w = vov(s);
    return w * w / v;
  };
  return -integrate_piecewise(f, 0.0, 1.0) / (12.0 * static_cast<double>(N));
}

} // namespace jumpvar
