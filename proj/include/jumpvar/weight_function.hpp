#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "jumpvar/error.hpp"

namespace jumpvar {

// Adaptive Gauss-Kronrod on [a,b], split at the given kinks.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::vector<double> kinks = {}, double tol = 1e-12) {
  if (!(b > a)) return 0.0;
  kinks.push_back(a);
  kinks.push_back(b);
  std::sort(kinks.begin(), kinks.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < kinks.size(); ++k) {
    double lo = std::max(a, kinks[k]), hi = std::min(b, kinks[k + 1]);
    if (!(hi > lo)) continue;
    double err = 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, tol, &err);
    if (!std::isfinite(v) || err > 1e-7 * std::max(1.0, std::abs(v)))
      throw ComputationError("quadrature did not converge on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    total += v;
  }
  return total;
}

class WeightFunction {
public:
  using Fn = std::function<double(double)>;

  WeightFunction(std::string name, Fn g, Fn g_prime, std::vector<double> kinks = {})
      : name_(std::move(name)), g_(std::move(g)), gp_(std::move(g_prime)), kinks_(std::move(kinks)) {
    std::sort(kinks_.begin(), kinks_.end());
    if (std::abs(g_(0.0)) > 1e-12 || std::abs(g_(1.0)) > 1e-12) throw ConfigError("weight function must vanish at 0 and 1");
    psi2_ = integrate_piecewise([this](double x) { double v = g_(x); return v * v; }, 0.0, 1.0, kinks_);
    if (!(psi2_ > 0)) throw ConfigError("weight function must have positive square integral");
    psi1_ = integrate_piecewise([this](double x) { double v = gp_(x); return v * v; }, 0.0, 1.0, kinks_);
  }

  // g(x) = min(x, 1-x)
  static WeightFunction triangular() {
    WeightFunction w(
        "triangular", [](double x) { return std::min(x, 1.0 - x); },
        [](double x) { return x < 0.5 ? 1.0 : -1.0; }, {0.5});
    w.triangular_ = true;
    return w;
  }

  static WeightFunction sine() {
    return WeightFunction(
        "sine", [](double x) { return std::sin(std::numbers::pi * x); },
        [](double x) { return std::numbers::pi * std::cos(std::numbers::pi * x); });
  }

  double operator()(double x) const { return g_(x); }
  double derivative(double x) const { return gp_(x); }
  const Fn& g() const { return g_; }
  const Fn& g_prime() const { return gp_; }
  const std::vector<double>& kinks() const { return kinks_; }
  const std::string& name() const { return name_; }
  bool is_triangular() const { return triangular_; }
  double psi1() const { return psi1_; }
  double psi2() const { return psi2_; }

private:
  std::string name_;
  Fn g_, gp_;
  std::vector<double> kinks_;
  bool triangular_ = false;
  double psi1_ = 0, psi2_ = 0;
};

struct WeightConstants {
  double psi1 = 0, psi2 = 0;
  double psi1_K = 0, psi2_K = 0;
};

// (1 + 2/K^2)/12, the discrete second moment of the triangular kernel.
inline double psi_K(int K) { return (1.0 + 2.0 / (static_cast<double>(K) * K)) / 12.0; }

inline WeightConstants weight_constants(const WeightFunction& g, int K) {
  if (K < 2) throw ConfigError("weight_constants: K must be at least 2");
  WeightConstants c;
  c.psi1 = g.psi1();
  c.psi2 = g.psi2();
  const double Kd = K;
  double s1 = 0, s2 = 0;
  for (int j = 1; j <= K; ++j) {
    double d = g(j / Kd) - g((j - 1) / Kd);
    s1 += d * d;
  }
  for (int j = 1; j < K; ++j) {
    double v = g(j / Kd);
    s2 += v * v;
  }
  c.psi1_K = Kd * s1;
  c.psi2_K = s2 / Kd;
  return c;
}

} // namespace jumpvar
