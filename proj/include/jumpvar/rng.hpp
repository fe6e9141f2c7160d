#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace jumpvar {

// Philox4x64-10 block function (Salmon et al. counter-based generator).
using PhiloxBlock = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

inline PhiloxBlock philox4x64_10(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint64_t M0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t M1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t W0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t W1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    unsigned __int128 p0 = static_cast<unsigned __int128>(M0) * ctr[0];
    unsigned __int128 p1 = static_cast<unsigned __int128>(M1) * ctr[2];
    auto hi0 = static_cast<std::uint64_t>(p0 >> 64), lo0 = static_cast<std::uint64_t>(p0);
    auto hi1 = static_cast<std::uint64_t>(p1 >> 64), lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

namespace stream {
inline constexpr std::uint64_t price = 1;
inline constexpr std::uint64_t volatility = 2;
inline constexpr std::uint64_t jump = 3;
inline constexpr std::uint64_t outlier = 4;
inline constexpr std::uint64_t noise = 5;
inline constexpr std::uint64_t init = 6;
inline constexpr std::uint64_t quadrature = 7;
} // namespace stream

// Stream of 64-bit words keyed by (seed, stream_id, path_id).
// Any (key, position) pair can be reproduced without replaying earlier draws.
class CounterRng {
public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t path_id)
      : key_{seed, (stream_id << 40) ^ path_id} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buf_ = philox4x64_10({block_, 0, 0, 0}, key_);
      ++block_;
      pos_ = 0;
    }
    return buf_[pos_++];
  }

  // Uniform on the open interval (0,1) with 53 random bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0) continue;
      v = v * v * v;
      double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  // Index uniform on [lo, hi] inclusive.
  std::uint64_t uniform_index(std::uint64_t lo, std::uint64_t hi) {
    std::uint64_t span = hi - lo + 1;
    if (span == 0) return (*this)();
    std::uint64_t limit = max() - max() % span;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return lo + x % span;
  }

private:
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  PhiloxBlock buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace jumpvar
