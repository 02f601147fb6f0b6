#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qpcube/cube.hpp"
#include "qpcube/enumerate.hpp"
#include "qpcube/subgraph.hpp"

namespace qpcube {

namespace detail {

inline double log_binom(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// falling factorial (d)_s
inline double falling(int d, int s) {
  double r = 1.0;
  for (int i = 0; i < s; ++i) r *= static_cast<double>(d - i);
  return r;
}

}  // namespace detail

// P(A): the vertices of G induce exactly G in Q_p and G is a component.
// p^e q^{e'} q^{vd - 2e - 2e'}.
inline double component_probability(const CubeSubgraph& g, double p) {
  const double q = 1.0 - p;
  const auto e = static_cast<double>(g.edges.size());
  const auto ep = static_cast<double>(internal_nonedges(g));
  const double vd = static_cast<double>(g.size()) * g.d;
  return std::pow(p, e) * std::pow(q, vd - 2.0 * e - ep);
}

// P(A_1 and A_2) for two component events in the same Q^d. Zero when the
// vertex sets meet; otherwise each cube edge between the two sets is required
// absent exactly once.
inline double joint_component_probability(const CubeSubgraph& g1, const CubeSubgraph& g2,
                                          double p) {
  if (g1.d != g2.d)
    throw std::invalid_argument("joint_component_probability: dimension mismatch");
  for (Vertex v : g1.vertices)
    if (g2.contains(v)) return 0.0;
  const int d = g1.d;
  std::uint64_t cut = 0;
  for (Vertex v : g1.vertices)
    for (int i = 0; i < d; ++i)
      if (g2.contains(v ^ (Vertex{1} << i))) ++cut;
  const double q = 1.0 - p;
  const auto e1 = static_cast<double>(g1.edges.size());
  const auto e2 = static_cast<double>(g2.edges.size());
  const auto ep1 = static_cast<double>(internal_nonedges(g1));
  const auto ep2 = static_cast<double>(internal_nonedges(g2));
  const double b1 = static_cast<double>(g1.size()) * d - 2.0 * e1 - 2.0 * ep1;
  const double b2 = static_cast<double>(g2.size()) * d - 2.0 * e2 - 2.0 * ep2;
  return std::pow(p, e1 + e2) *
         std::pow(q, ep1 + ep2 + b1 + b2 - static_cast<double>(cut));
}

// beta_i = 1/(2^s s!) (p/q^2)^e (1/q)^{e'}
inline double beta_constant(const CanonicalForm& f, double p) {
  const double q = 1.0 - p;
  const auto e = static_cast<double>(f.edges.size());
  const auto ep = static_cast<double>(internal_nonedges(f));
  double denom = std::ldexp(1.0, f.span) * std::tgamma(f.span + 1.0);
  return std::pow(p / (q * q), e) * std::pow(q, -ep) / denom;
}

// E[Y_i] = (p/q^2)^e q^{-e'} 2^{d-s} C(d,s) q^{td}. Direct product when it
// stays in range, log-space otherwise (q^{td} spans hundreds of orders of
// magnitude).
inline double expected_class_count(const CanonicalForm& f, int d, double p) {
  if (d < f.span) throw std::invalid_argument("expected_class_count: d below span");
  if (d > kMaxDimension) throw std::invalid_argument("expected_class_count: d out of range");
  const double q = 1.0 - p;
  const auto e = static_cast<double>(f.edges.size());
  const auto ep = static_cast<double>(internal_nonedges(f));
  const double td = static_cast<double>(f.size()) * d;
  const double lg = e * (std::log(p) - 2.0 * std::log(q)) - ep * std::log(q) +
                    (d - f.span) * std::log(2.0) + detail::log_binom(d, f.span) +
                    td * std::log(q);
  if (lg > -700.0 && lg < 700.0) {
    double tail = std::pow(q, td);
    if (tail > 0.0) {
      return std::pow(p / (q * q), e) * std::pow(q, -ep) *
             std::ldexp(1.0, d - f.span) *
             static_cast<double>(binom_u64(d, f.span)) * tail;
    }
  }
  return std::exp(lg);
}

struct ClassExpectation {
  CanonicalForm form;
  std::uint64_t e = 0;
  std::uint64_t e_prime = 0;
  int s = 0;
  double expected_count = 0.0;
  double beta = 0.0;
};

inline ClassExpectation class_expectation(const CanonicalForm& f, int d, double p) {
  ClassExpectation out;
  out.form = f;
  out.e = f.edges.size();
  out.e_prime = internal_nonedges(f);
  out.s = f.span;
  out.expected_count = expected_class_count(f, d, p);
  out.beta = beta_constant(f, p);
  return out;
}

// Exact expected number of components of size t, t in {1,2,3}; every class of
// those sizes is a spreading tree so the class sums close. The printed-variant
// flag swaps the size-3 leading coefficient 1/2 for 2 (an alternative closed
// form kept for side-by-side reporting; the d <= 3 oracle agrees with 1/2).
inline double mu_exact(int t, int d, double p, bool mu3_coeff2_variant = false) {
  if (d < 1 || d > kMaxDimension) throw std::invalid_argument("mu_exact: bad dimension");
  const double q = 1.0 - p;
  switch (t) {
    case 1:
      return std::pow(2.0 * q, d);
    case 2:
      if (d < 2) throw std::invalid_argument("mu_exact: need d >= 2 for t = 2");
      return (p / (2.0 * q * q)) * d * std::pow(2.0 * q * q, d);
    case 3: {
      if (d < 2) throw std::invalid_argument("mu_exact: need d >= 2 for t = 3");
      const double coeff = mu3_coeff2_variant ? 2.0 : 0.5;
      return coeff * (p * p) / (q * q * q * q) * d * (d - 1.0) *
             std::pow(2.0 * q * q * q, d);
    }
    default:
      throw std::invalid_argument("mu_exact: only t in {1,2,3}");
  }
}

struct AsymptoticValue {
  double value = 0.0;
  bool beyond_mp = false;  // t > m_p: leading term still returned
};

// Leading term t^{t-2}/t! (p/q^2)^{t-1} d^{t-1} (2 q^t)^d.
inline AsymptoticValue mu_asymptotic(int t, int d, double p) {
  if (t < 1) throw std::invalid_argument("mu_asymptotic: t must be >= 1");
  if (d < 1 || d > kMaxDimension) throw std::invalid_argument("mu_asymptotic: bad dimension");
  const double q = 1.0 - p;
  AsymptoticValue out;
  out.beyond_mp = t > m_p(p);
  const double lg = (t - 2.0) * std::log(t) - std::lgamma(t + 1.0) +
                    (t - 1.0) * (std::log(p) - 2.0 * std::log(q)) +
                    (t - 1.0) * std::log(static_cast<double>(d)) +
                    d * (std::log(2.0) + t * std::log(q));
  if (lg > -700.0 && lg < 700.0) {
    double coef = std::pow(static_cast<double>(t), t - 2.0) / std::tgamma(t + 1.0);
    double base = 2.0 * std::pow(q, t);
    double tail = std::pow(base, d);
    if (tail > 0.0) {
      out.value = coef * std::pow(p / (q * q), t - 1.0) *
                  std::pow(static_cast<double>(d), t - 1.0) * tail;
      return out;
    }
  }
  out.value = std::exp(lg);
  return out;
}

struct ClassConstant {
  int t = 0;                        // minimum size among the forms
  int s = 0;                        // maximum span among minimum-size forms
  std::vector<std::size_t> istar;   // indices attaining both
  double c = 0.0;                   // sum of beta_i over I*
  bool size_warning = false;        // some form exceeds m_p
};

inline ClassConstant class_constant(std::span<const CanonicalForm> forms, double p) {
  if (forms.empty()) throw std::invalid_argument("class_constant: empty form list");
  for (std::size_t i = 0; i < forms.size(); ++i)
    for (std::size_t j = i + 1; j < forms.size(); ++j)
      if (forms[i] == forms[j])
        throw std::invalid_argument("class_constant: forms must be pairwise distinct");
  ClassConstant out;
  std::size_t tmin = forms[0].size();
  for (const auto& f : forms) tmin = std::min(tmin, f.size());
  int smax = 0;
  for (const auto& f : forms)
    if (f.size() == tmin) smax = std::max(smax, f.span);
  out.t = static_cast<int>(tmin);
  out.s = smax;
  const int mp = m_p(p);
  for (std::size_t i = 0; i < forms.size(); ++i) {
    if (static_cast<int>(forms[i].size()) > mp) out.size_warning = true;
    if (forms[i].size() == tmin && forms[i].span == smax) {
      out.istar.push_back(i);
      out.c += beta_constant(forms[i], p);
    }
  }
  return out;
}

// lambda = E[Y], Delta+ / Delta- over the dependency graph (vertex sets meet
// or joined by a cube edge), and the resulting total-variation bound.
struct SteinChenTerms {
  double lambda = 0.0;
  double delta_plus = 0.0;
  double delta_minus = 0.0;
  double tv_bound = 0.0;
};

namespace detail {

struct EmbeddingSet {
  // One entry per subgraph of Q^d ambient-isomorphic to one of the forms.
  std::vector<std::vector<Vertex>> verts;
  std::vector<std::array<std::uint64_t, 4>> mask;   // vertex bitset over 2^d
  std::vector<std::array<std::uint64_t, 4>> touch;  // mask + one-step neighborhood
  std::vector<double> pi;
  std::vector<std::uint32_t> form;
};

inline void mask_set(std::array<std::uint64_t, 4>& m, Vertex v) {
  m[v >> 6] |= std::uint64_t{1} << (v & 63);
}

inline bool mask_meets(const std::array<std::uint64_t, 4>& a,
                       const std::array<std::uint64_t, 4>& b) {
  return ((a[0] & b[0]) | (a[1] & b[1]) | (a[2] & b[2]) | (a[3] & b[3])) != 0;
}

inline bool mask_test(const std::array<std::uint64_t, 4>& m, Vertex v) {
  return (m[v >> 6] >> (v & 63)) & 1;
}

template <typename F>
inline void for_each_combination(int d, int s, F&& visit) {
  std::vector<int> idx(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (s == 0) {
    visit(idx);
    return;
  }
  for (;;) {
    visit(idx);
    int i = s - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == d - s + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < s; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

inline EmbeddingSet enumerate_embeddings(std::span<const CanonicalForm> forms, int d, double p) {
  EmbeddingSet out;
  const double q = 1.0 - p;
  for (std::uint32_t fi = 0; fi < forms.size(); ++fi) {
    const CanonicalForm& f = forms[fi];
    const int s = f.span;
    if (d < s) throw std::invalid_argument("stein_chen_terms: d below a form span");
    const auto e = static_cast<double>(f.edges.size());
    const auto ep = static_cast<double>(internal_nonedges(f));
    const double pi = std::pow(p, e) *
                      std::pow(q, static_cast<double>(f.size()) * d - 2.0 * e - ep);
    for_each_combination(d, s, [&](const std::vector<int>& supp) {
      std::vector<int> rest;
      rest.reserve(static_cast<std::size_t>(d - s));
      {
        std::size_t k = 0;
        for (int i = 0; i < d; ++i) {
          if (k < supp.size() && supp[k] == i) {
            ++k;
            continue;
          }
          rest.push_back(i);
        }
      }
      auto scatter = [&](Vertex x) {
        Vertex y = 0;
        for (std::size_t j = 0; j < supp.size(); ++j)
          if (x & (Vertex{1} << j)) y |= Vertex{1} << supp[j];
        return y;
      };
      const std::uint64_t offsets = std::uint64_t{1} << rest.size();
      for (std::uint64_t z = 0; z < offsets; ++z) {
        Vertex base = 0;
        for (std::size_t k = 0; k < rest.size(); ++k)
          if (z & (std::uint64_t{1} << k)) base |= Vertex{1} << rest[k];
        std::vector<Vertex> vs;
        vs.reserve(f.size());
        std::array<std::uint64_t, 4> m{};
        std::array<std::uint64_t, 4> tch{};
        for (Vertex x : f.vertices) {
          Vertex v = base | scatter(x);
          vs.push_back(v);
          mask_set(m, v);
          mask_set(tch, v);
          for (int i = 0; i < d; ++i) mask_set(tch, v ^ (Vertex{1} << i));
        }
        out.verts.push_back(std::move(vs));
        out.mask.push_back(m);
        out.touch.push_back(tch);
        out.pi.push_back(pi);
        out.form.push_back(fi);
      }
    });
  }
  return out;
}

}  // namespace detail

// Exact dependency sums over all embeddings of the given forms in Q^d.
// Weights, when present, are the multiplicities t_i of the weighted sum
// sum_i t_i 1_{A_i}; the unweighted case is weights all one.
inline SteinChenTerms stein_chen_terms(std::span<const CanonicalForm> forms, int d, double p,
                                       std::span<const std::uint64_t> weights = {},
                                       int d_cap = 8) {
  if (forms.empty()) throw std::invalid_argument("stein_chen_terms: empty form list");
  if (d > d_cap || d < 1)
    throw std::invalid_argument("stein_chen_terms: d exceeds enumeration cap");
  if (!weights.empty() && weights.size() != forms.size())
    throw std::invalid_argument("stein_chen_terms: weight count mismatch");
  const double q = 1.0 - p;
  auto es = detail::enumerate_embeddings(forms, d, p);
  const std::size_t n = es.pi.size();
  auto weight_of = [&](std::size_t i) -> double {
    return weights.empty() ? 1.0 : static_cast<double>(weights[es.form[i]]);
  };

  // per-form exponents for the joint probability
  std::vector<double> fe(forms.size()), fep(forms.size()), fbnd(forms.size());
  for (std::size_t k = 0; k < forms.size(); ++k) {
    fe[k] = static_cast<double>(forms[k].edges.size());
    fep[k] = static_cast<double>(internal_nonedges(forms[k]));
    fbnd[k] = static_cast<double>(forms[k].size()) * d - 2.0 * fe[k] - 2.0 * fep[k];
  }

  long double lambda = 0.0L, dplus = 0.0L, dminus = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const double ti = weight_of(i);
    lambda += static_cast<long double>(ti) * es.pi[i];
    dplus += static_cast<long double>(ti) * (ti - 1.0) * es.pi[i];
    dminus += static_cast<long double>(ti * ti) * es.pi[i] * es.pi[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!detail::mask_meets(es.touch[i], es.mask[j])) continue;  // independent
      const double tt = weight_of(i) * weight_of(j);
      dminus += 2.0L * tt * es.pi[i] * es.pi[j];
      if (detail::mask_meets(es.mask[i], es.mask[j])) continue;  // overlapping: P = 0
      std::uint64_t cut = 0;
      for (Vertex v : es.verts[i])
        for (int k = 0; k < d; ++k)
          if (detail::mask_test(es.mask[j], v ^ (Vertex{1} << k))) ++cut;
      const std::size_t fi = es.form[i], fj = es.form[j];
      const double joint =
          std::pow(p, fe[fi] + fe[fj]) *
          std::pow(q, fep[fi] + fep[fj] + fbnd[fi] + fbnd[fj] - static_cast<double>(cut));
      dplus += 2.0L * tt * joint;
    }
  }

  SteinChenTerms out;
  out.lambda = static_cast<double>(lambda);
  out.delta_plus = static_cast<double>(dplus);
  out.delta_minus = static_cast<double>(dminus);
  out.tv_bound = std::min(1.0 / out.lambda, 1.0) * (out.delta_plus + out.delta_minus);
  return out;
}

}  // namespace qpcube
