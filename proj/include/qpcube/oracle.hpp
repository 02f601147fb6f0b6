#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <vector>

#include "qpcube/subgraph.hpp"

namespace qpcube {

// Exact distribution of an integer statistic, from exhaustive enumeration of
// every edge subset at d <= 3 (at most 2^12 subgraphs).
struct ExactLaw {
  std::map<std::int64_t, double> pmf;

  double total() const {
    double s = 0.0;
    for (const auto& [k, v] : pmf) s += v;
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (const auto& [k, v] : pmf) s += static_cast<double>(k) * v;
    return s;
  }
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (const auto& [k, v] : pmf) {
      const double dk = static_cast<double>(k) - m;
      s += dk * dk * v;
    }
    return s;
  }
};

struct OracleComponent {
  std::vector<Vertex> verts;
  EdgeList edges;
};

using OracleOutcome = std::vector<OracleComponent>;

// Enumerates all 2^{#edges} spanning subgraphs of Q^d, calling
// visit(probability, components) for each. d in {1,2,3} only; d = 4 already
// has 2^32 subsets.
template <typename F>
inline void oracle_for_each(int d, double p, F&& visit) {
  if (d < 1 || d > 3) throw std::invalid_argument("oracle_for_each: d must be in {1,2,3}");
  const int n = 1 << d;
  EdgeList all_edges;
  for (Vertex v = 0; v < static_cast<Vertex>(n); ++v)
    for (int i = 0; i < d; ++i) {
      Vertex w = v ^ (Vertex{1} << i);
      if (w > v) all_edges.emplace_back(v, w);
    }
  const int m = static_cast<int>(all_edges.size());
  const double q = 1.0 - p;
  std::vector<double> wp(static_cast<std::size_t>(m + 1)), wq(static_cast<std::size_t>(m + 1));
  wp[0] = wq[0] = 1.0;
  for (int k = 1; k <= m; ++k) {
    wp[static_cast<std::size_t>(k)] = wp[static_cast<std::size_t>(k - 1)] * p;
    wq[static_cast<std::size_t>(k)] = wq[static_cast<std::size_t>(k - 1)] * q;
  }

  std::vector<std::vector<std::pair<int, int>>> incident(static_cast<std::size_t>(n));
  for (int ei = 0; ei < m; ++ei) {
    const auto& [a, b] = all_edges[static_cast<std::size_t>(ei)];
    incident[static_cast<std::size_t>(a)].push_back({static_cast<int>(b), ei});
    incident[static_cast<std::size_t>(b)].push_back({static_cast<int>(a), ei});
  }

  OracleOutcome comps;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    const int pc = std::popcount(mask);
    const double prob = wp[static_cast<std::size_t>(pc)] * wq[static_cast<std::size_t>(m - pc)];
    comps.clear();
    std::uint32_t seen = 0;
    for (int root = 0; root < n; ++root) {
      if (seen & (1u << root)) continue;
      OracleComponent c;
      std::vector<int> stack{root};
      seen |= 1u << root;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        c.verts.push_back(static_cast<Vertex>(v));
        for (const auto& [w, ei] : incident[static_cast<std::size_t>(v)]) {
          if (!(mask & (1u << ei))) continue;
          if (v < w) c.edges.emplace_back(static_cast<Vertex>(v), static_cast<Vertex>(w));
          if (!(seen & (1u << w))) {
            seen |= 1u << w;
            stack.push_back(w);
          }
        }
      }
      std::sort(c.verts.begin(), c.verts.end());
      std::sort(c.edges.begin(), c.edges.end());
      comps.push_back(std::move(c));
    }
    visit(prob, comps);
  }
}

// Law of an arbitrary integer statistic of the component structure.
inline ExactLaw oracle_law(int d, double p,
                           const std::function<std::int64_t(const OracleOutcome&)>& stat) {
  ExactLaw law;
  oracle_for_each(d, p, [&](double prob, const OracleOutcome& comps) {
    law.pmf[stat(comps)] += prob;
  });
  return law;
}

// Joint law of the size counts (X_1, ..., X_{2^d}).
inline std::map<std::vector<std::uint32_t>, double> oracle_size_vector_law(int d, double p) {
  std::map<std::vector<std::uint32_t>, double> law;
  const std::size_t n = std::size_t{1} << d;
  oracle_for_each(d, p, [&](double prob, const OracleOutcome& comps) {
    std::vector<std::uint32_t> key(n, 0);
    for (const auto& c : comps) ++key[c.verts.size() - 1];
    law[key] += prob;
  });
  return law;
}

inline ExactLaw oracle_law_Xt(int d, double p, int t) {
  return oracle_law(d, p, [t](const OracleOutcome& comps) {
    std::int64_t c = 0;
    for (const auto& comp : comps)
      if (static_cast<int>(comp.verts.size()) == t) ++c;
    return c;
  });
}

inline ExactLaw oracle_law_X(int d, double p) {
  return oracle_law(d, p, [](const OracleOutcome& comps) {
    return static_cast<std::int64_t>(comps.size());
  });
}

// Fragment size Z = 2^d - L1 (largest component, ties by smallest vertex).
inline ExactLaw oracle_law_Z(int d, double p) {
  const std::int64_t n = std::int64_t{1} << d;
  return oracle_law(d, p, [n](const OracleOutcome& comps) {
    std::size_t l1 = 0;
    for (const auto& c : comps) l1 = std::max(l1, c.verts.size());
    return n - static_cast<std::int64_t>(l1);
  });
}

inline ExactLaw oracle_law_L2(int d, double p) {
  return oracle_law(d, p, [](const OracleOutcome& comps) {
    std::size_t l1 = 0, l2 = 0;
    for (const auto& c : comps) {
      std::size_t s = c.verts.size();
      if (s >= l1) {
        l2 = l1;
        l1 = s;
      } else if (s > l2) {
        l2 = s;
      }
    }
    return static_cast<std::int64_t>(l2);
  });
}

// Law of the weighted class count sum_i w_i * #{components ambient-isomorphic
// to forms[i]}. Default weights are all one.
inline ExactLaw oracle_class_count_law(int d, double p,
                                       const std::vector<CanonicalForm>& forms,
                                       const std::vector<std::uint64_t>& weights = {}) {
  if (!weights.empty() && weights.size() != forms.size())
    throw std::invalid_argument("oracle_class_count_law: weight count mismatch");
  return oracle_law(d, p, [&](const OracleOutcome& comps) {
    std::int64_t y = 0;
    for (const auto& c : comps) {
      CanonicalForm cf = canonical_copy(CubeSubgraph::unchecked(d, c.verts, c.edges));
      for (std::size_t i = 0; i < forms.size(); ++i)
        if (cf == forms[i]) {
          y += weights.empty() ? 1 : static_cast<std::int64_t>(weights[i]);
          break;
        }
    }
    return y;
  });
}

// Per-class expected counts E[Y_i], one pass.
inline std::map<CanonicalForm, double> oracle_class_means(int d, double p) {
  std::map<CanonicalForm, double> means;
  oracle_for_each(d, p, [&](double prob, const OracleOutcome& comps) {
    for (const auto& c : comps)
      means[canonical_copy(CubeSubgraph::unchecked(d, c.verts, c.edges))] += prob;
  });
  return means;
}

// P(G is a component of Q_p).
inline double oracle_event_probability(int d, double p, const CubeSubgraph& g) {
  double total = 0.0;
  oracle_for_each(d, p, [&](double prob, const OracleOutcome& comps) {
    for (const auto& c : comps)
      if (c.verts == g.vertices && c.edges == g.edges) {
        total += prob;
        return;
      }
  });
  return total;
}

inline double oracle_joint_event_probability(int d, double p, const CubeSubgraph& g1,
                                             const CubeSubgraph& g2) {
  double total = 0.0;
  oracle_for_each(d, p, [&](double prob, const OracleOutcome& comps) {
    bool h1 = false, h2 = false;
    for (const auto& c : comps) {
      if (c.verts == g1.vertices && c.edges == g1.edges) h1 = true;
      if (c.verts == g2.vertices && c.edges == g2.edges) h2 = true;
    }
    if (h1 && h2) total += prob;
  });
  return total;
}

}  // namespace qpcube
