#pragma once

#include <bit>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "qpcube/bigint.hpp"
#include "qpcube/subgraph.hpp"

namespace qpcube {

namespace detail {

// ESU-style enumeration of connected vertex sets of size t in Q^h, each set
// exactly once (rooted at its minimum vertex). Host dim h <= 6 so sets fit a
// 64-bit mask.
template <typename F>
inline void connected_sets(int h, int t, F&& visit) {
  const int n = 1 << h;
  std::vector<std::uint64_t> nb(static_cast<std::size_t>(n), 0);
  for (int v = 0; v < n; ++v)
    for (int i = 0; i < h; ++i) nb[static_cast<std::size_t>(v)] |= std::uint64_t{1} << (v ^ (1 << i));

  struct Rec {
    int t;
    const std::vector<std::uint64_t>* nb;
    std::uint64_t gt_root;
    F* visit;
    void operator()(std::uint64_t sub, std::uint64_t ext, std::uint64_t nbhd) {
      if (std::popcount(sub) == t) {
        (*visit)(sub);
        return;
      }
      while (ext != 0) {
        std::uint64_t wbit = ext & (~ext + 1);
        ext ^= wbit;
        int w = std::countr_zero(wbit);
        std::uint64_t fresh = (*nb)[static_cast<std::size_t>(w)] & ~nbhd & gt_root;
        (*this)(sub | wbit, ext | fresh, nbhd | (*nb)[static_cast<std::size_t>(w)] | wbit);
      }
    }
  };

  for (int v = 0; v < n - t + 1; ++v) {
    std::uint64_t vbit = std::uint64_t{1} << v;
    std::uint64_t gt = (v == 63) ? 0 : ~((vbit << 1) - 1);
    Rec rec{t, &nb, gt, &visit};
    rec(vbit, nb[static_cast<std::size_t>(v)] & gt, nb[static_cast<std::size_t>(v)] | vbit);
  }
}

inline bool spanning_connected(const std::vector<int>& ea, const std::vector<int>& eb,
                               std::uint32_t subset, int t) {
  int parent[8];
  for (int i = 0; i < t; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int comps = t;
  for (std::size_t k = 0; subset != 0; ++k, subset >>= 1) {
    if (!(subset & 1)) continue;
    int ra = find(ea[k]), rb = find(eb[k]);
    if (ra != rb) {
      parent[ra] = rb;
      --comps;
    }
  }
  return comps == 1;
}

}  // namespace detail

// Every canonical form of a connected cube subgraph on exactly t vertices, in
// the deterministic total order. Exhaustive search inside Q^{t-1}: every size-t
// cube subgraph embeds there, so canonicalizing all connected subgraphs of
// Q^{t-1} and deduplicating covers every class.
inline std::vector<CanonicalForm> enumerate_classes(int t, int cap = 6) {
  if (cap > 7) throw std::invalid_argument("enumerate_classes: cap exceeds supported limit (7)");
  if (t < 1) throw std::invalid_argument("enumerate_classes: size must be >= 1");
  if (t > cap) throw std::invalid_argument("enumerate_classes: size exceeds enumeration cap");
  if (t == 1) {
    CanonicalForm f;
    f.span = 0;
    f.vertices = {0};
    return {f};
  }
  const int h = t - 1;
  std::set<CanonicalForm> found;
  detail::connected_sets(h, t, [&](std::uint64_t mask) {
    std::vector<Vertex> verts;
    verts.reserve(static_cast<std::size_t>(t));
    for (std::uint64_t m = mask; m != 0; m &= m - 1)
      verts.push_back(static_cast<Vertex>(std::countr_zero(m)));
    // induced cube edges, as index pairs into verts
    std::vector<int> ea, eb;
    EdgeList raw;
    for (int i = 0; i < t; ++i)
      for (int dim = 0; dim < h; ++dim) {
        Vertex w = verts[static_cast<std::size_t>(i)] ^ (Vertex{1} << dim);
        if (w <= verts[static_cast<std::size_t>(i)] || !(mask & (std::uint64_t{1} << w))) continue;
        int j = 0;
        while (verts[static_cast<std::size_t>(j)] != w) ++j;
        ea.push_back(i);
        eb.push_back(j);
        raw.emplace_back(verts[static_cast<std::size_t>(i)], w);
      }
    const auto m = static_cast<std::uint32_t>(raw.size());
    for (std::uint32_t sub = 0; sub < (1u << m); ++sub) {
      if (std::popcount(sub) < t - 1) continue;
      if (!detail::spanning_connected(ea, eb, sub, t)) continue;
      EdgeList chosen;
      chosen.reserve(static_cast<std::size_t>(std::popcount(sub)));
      for (std::uint32_t k = 0; k < m; ++k)
        if (sub & (1u << k)) chosen.push_back(raw[k]);
      found.insert(canonical_copy(CubeSubgraph::unchecked(h, verts, std::move(chosen))));
    }
  });
  return {found.begin(), found.end()};
}

// Number of subgraphs of Q^d ambient-isomorphic to a form of span s:
// 2^{d-s} C(d,s).
inline BigUint count_embeddings(const CanonicalForm& f, int d) {
  if (d < f.span) throw std::invalid_argument("count_embeddings: d below span");
  if (d > kMaxDimension) throw std::invalid_argument("count_embeddings: d out of range");
  BigUint r = BigUint::binomial(static_cast<unsigned>(d), static_cast<unsigned>(f.span));
  r.shl(static_cast<std::uint64_t>(d - f.span));
  return r;
}

inline BigUint count_embeddings(const CubeSubgraph& h, int d) {
  return count_embeddings(canonical_copy(h), d);
}

struct SpreadingTreeCounts {
  BigUint classes;    // 2^{t-1} t^{t-3}
  BigUint subgraphs;  // 2^d t^{t-3} C(d, t-1)
};

inline SpreadingTreeCounts count_spreading_trees(int t, int d) {
  if (t < 1 || d < t - 1 || d > kMaxDimension)
    throw std::invalid_argument("count_spreading_trees: need d >= t-1 >= 0");
  SpreadingTreeCounts out;
  if (t <= 2) {
    out.classes = BigUint(1);
    if (t == 1) {
      out.subgraphs = BigUint::pow2(static_cast<std::uint64_t>(d));
    } else {
      out.subgraphs = BigUint(static_cast<std::uint64_t>(d));
      out.subgraphs.shl(static_cast<std::uint64_t>(d - 1));
    }
    return out;
  }
  const auto tu = static_cast<std::uint64_t>(t);
  BigUint tpow = BigUint::pow(tu, tu - 3);
  out.classes = tpow;
  out.classes.shl(tu - 1);
  out.subgraphs = tpow * BigUint::binomial(static_cast<unsigned>(d), static_cast<unsigned>(t - 1));
  out.subgraphs.shl(static_cast<std::uint64_t>(d));
  return out;
}

}  // namespace qpcube
