#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpcube/bigint.hpp"

namespace qpcube {

// Vertices of Q^d are d-bit labels; coordinate i of the 0/1 vector is bit i-1.
using Vertex = std::uint64_t;

inline constexpr int kMaxDimension = 62;

// Edge probability given as a decimal string numerator/10^digits. Keeping the
// exact decimal lets the sampler threshold and the m_p boundary test be
// bit-reproducible regardless of how the platform rounds doubles.
struct DecimalProb {
  std::uint64_t numerator = 0;
  int digits = 0;  // 1..18
  std::string text;

  double value() const { return std::strtod(text.c_str(), nullptr); }

  std::uint64_t pow10() const {
    std::uint64_t r = 1;
    for (int i = 0; i < digits; ++i) r *= 10;
    return r;
  }

  static DecimalProb parse(const std::string& s) {
    std::size_t dot = s.find('.');
    if (dot == std::string::npos)
      throw std::invalid_argument("probability must be a decimal like 0.25: " + s);
    std::string ip = s.substr(0, dot);
    std::string fp = s.substr(dot + 1);
    if (ip != "" && ip != "0")
      throw std::invalid_argument("probability must be in (0,1): " + s);
    if (fp.empty() || fp.size() > 18)
      throw std::invalid_argument("probability needs 1..18 fractional digits: " + s);
    std::uint64_t num = 0;
    for (char c : fp) {
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw std::invalid_argument("bad probability literal: " + s);
      num = num * 10 + static_cast<std::uint64_t>(c - '0');
    }
    DecimalProb out;
    out.numerator = num;
    out.digits = static_cast<int>(fp.size());
    out.text = (ip.empty() ? "0" : ip) + "." + fp;
    if (num == 0) throw std::invalid_argument("probability must be > 0: " + s);
    return out;
  }
};

// Fixed model parameters: dimension and edge probability with 0 < p < 1/2.
struct Params {
  int d = 0;
  double p = 0.0;
  double q = 0.0;
  std::optional<DecimalProb> decimal;

  Params(int dim, double prob) : d(dim), p(prob), q(1.0 - prob) { validate(); }

  Params(int dim, const std::string& prob_text)
      : d(dim), decimal(DecimalProb::parse(prob_text)) {
    p = decimal->value();
    q = 1.0 - p;
    // exact check 0 < p < 1/2
    if (2 * decimal->numerator >= decimal->pow10())
      throw std::invalid_argument("p must satisfy 0 < p < 1/2: " + prob_text);
    validate();
  }

 private:
  void validate() const {
    if (d < 2 || d > kMaxDimension)
      throw std::invalid_argument("dimension must be in [2, 62]");
    if (!(p > 0.0) || !(p < 0.5))
      throw std::invalid_argument("p must satisfy 0 < p < 1/2");
  }
};

inline int hamming(Vertex a, Vertex b) { return std::popcount(a ^ b); }

// The d neighbors of v in Q^d, ordered by flipped coordinate.
inline std::vector<Vertex> neighbors(Vertex v, int d) {
  if (d < 1 || d > kMaxDimension)
    throw std::invalid_argument("neighbors: dimension must be in [1, 62]");
  if (v >> d != 0) throw std::invalid_argument("neighbors: vertex id out of range");
  std::vector<Vertex> out;
  out.reserve(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) out.push_back(v ^ (Vertex{1} << i));
  return out;
}

// |B_r(u)| = sum_{k<=r} C(d,k), exact.
inline BigUint ball_volume(int d, int r) {
  if (d < 0 || d > kMaxDimension) throw std::invalid_argument("ball_volume: bad dimension");
  if (r < 0 || r > d) throw std::invalid_argument("ball_volume: radius must be in [0, d]");
  BigUint sum;
  for (int k = 0; k <= r; ++k) sum += BigUint::binomial(static_cast<unsigned>(d),
                                                        static_cast<unsigned>(k));
  return sum;
}

inline double binary_entropy(double x) {
  if (!(x > 0.0) || !(x < 1.0))
    throw std::invalid_argument("binary_entropy: argument must be in (0,1)");
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

namespace detail {

// Largest t with 2 q^t >= 1, walking from the float candidate with the given
// predicate deciding each step.
template <typename GE>
inline int mp_walk(double q, GE&& ge) {
  const long double lq = -std::log2(static_cast<long double>(q));
  std::uint64_t t =
      static_cast<std::uint64_t>(std::max(1.0L, std::floor(1.0L / lq)));
  while (t > 1 && !ge(t)) --t;
  while (ge(t + 1)) ++t;
  return static_cast<int>(t);
}

}  // namespace detail

// m_p = floor(1 / log2(1/q)), the largest t with 2 q^t >= 1, ties resolved on
// the inclusive side. A double input carries ~1 ulp of representation error,
// so the test runs in extended precision with a guard band: anything within
// 1e-12 of the boundary counts as a tie. (Exact boundaries such as
// p = 1 - 1/sqrt(2), where 2 q^2 = 1, then land inclusively as intended.)
inline int m_p(double p) {
  if (!(p > 0.0) || !(p < 0.5)) throw std::invalid_argument("m_p: need 0 < p < 1/2");
  const long double q = 1.0L - static_cast<long double>(p);
  auto ge = [&](std::uint64_t t) {
    const long double v = 2.0L * std::pow(q, static_cast<long double>(t));
    return v >= 1.0L - 1e-12L;
  };
  return detail::mp_walk(static_cast<double>(q), ge);
}

// Exact-rational variant for decimal inputs: 2 q^t >= 1 becomes
// 2 (10^k - num)^t >= 10^{kt}, decided in integers.
inline int m_p(const DecimalProb& p) {
  const std::uint64_t den = p.pow10();
  if (2 * p.numerator >= den || p.numerator == 0)
    throw std::invalid_argument("m_p: need 0 < p < 1/2");
  const std::uint64_t qn = den - p.numerator;
  const long double q = 1.0L - static_cast<long double>(p.value());
  const long double candidate = 1.0L / (-std::log2(q));
  if (candidate > 5000.0L) return m_p(p.value());  // beyond the exact-power budget
  auto ge = [&](std::uint64_t t) {
    BigUint lhs = BigUint::pow(qn, t);
    lhs.shl(1);
    return lhs >= BigUint::pow(den, t);
  };
  return detail::mp_walk(static_cast<double>(q), ge);
}

inline int m_p(const Params& params) {
  return params.decimal ? m_p(*params.decimal) : m_p(params.p);
}

// Unique eta in (0, 1/2) with h(eta) = log2(1/q), by bisection on the
// strictly increasing entropy. |h(eta) - target| <= tol on return.
inline double eta_star(double p, double tol = 1e-10) {
  if (!(p > 0.0) || !(p < 0.5)) throw std::invalid_argument("eta_star: need 0 < p < 1/2");
  if (!(tol > 0.0)) throw std::invalid_argument("eta_star: tol must be > 0");
  double target = -std::log2(1.0 - p);
  double lo = 0.0, hi = 0.5;
  for (int it = 0; it < 300; ++it) {
    double mid = 0.5 * (lo + hi);
    double val = binary_entropy(mid);
    if (std::fabs(val - target) <= tol) return mid;
    if (val < target)
      lo = mid;
    else
      hi = mid;
  }
  throw std::runtime_error("eta_star: bisection failed to reach tolerance");
}

inline std::uint64_t binom_u64(int n, int k) {
  return BigUint::binomial(static_cast<unsigned>(n), static_cast<unsigned>(k)).to_u64();
}

}  // namespace qpcube
