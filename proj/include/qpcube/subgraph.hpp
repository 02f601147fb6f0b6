#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpcube/cube.hpp"

namespace qpcube {

using EdgeList = std::vector<std::pair<Vertex, Vertex>>;

// A connected subgraph of some Q^d. Vertices sorted, edges stored as (lo, hi)
// pairs in sorted order; every edge flips exactly one coordinate and the whole
// graph is connected (checked on construction).
struct CubeSubgraph {
  int d = 0;
  std::vector<Vertex> vertices;
  EdgeList edges;

  CubeSubgraph(int dim, std::vector<Vertex> verts, EdgeList es)
      : d(dim), vertices(std::move(verts)), edges(std::move(es)) {
    normalize();
    validate();
  }

  // Skips validation; for internal call sites that construct by definition
  // (enumeration, census components, oracle components).
  static CubeSubgraph unchecked(int dim, std::vector<Vertex> verts, EdgeList es) {
    CubeSubgraph g;
    g.d = dim;
    g.vertices = std::move(verts);
    g.edges = std::move(es);
    g.normalize();
    return g;
  }

  std::size_t size() const { return vertices.size(); }

  bool contains(Vertex v) const {
    return std::binary_search(vertices.begin(), vertices.end(), v);
  }

  bool operator==(const CubeSubgraph&) const = default;

 private:
  CubeSubgraph() = default;

  void normalize() {
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    for (auto& e : edges)
      if (e.first > e.second) std::swap(e.first, e.second);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }

  void validate() const {
    if (d < 0 || d > kMaxDimension) throw std::invalid_argument("CubeSubgraph: bad dimension");
    if (vertices.empty()) throw std::invalid_argument("CubeSubgraph: empty vertex set");
    for (Vertex v : vertices)
      if ((v >> d) != 0)
        throw std::invalid_argument("CubeSubgraph: vertex id out of range");
    for (const auto& [a, b] : edges) {
      if (!contains(a) || !contains(b))
        throw std::invalid_argument("CubeSubgraph: edge endpoint not a member vertex");
      if (hamming(a, b) != 1)
        throw std::invalid_argument("CubeSubgraph: edge endpoints not adjacent in the cube");
    }
    // connectivity over the stored edges
    std::size_t n = vertices.size();
    std::vector<std::vector<std::uint32_t>> adj(n);
    auto index_of = [&](Vertex v) {
      return static_cast<std::uint32_t>(
          std::lower_bound(vertices.begin(), vertices.end(), v) - vertices.begin());
    };
    for (const auto& [a, b] : edges) {
      auto ia = index_of(a), ib = index_of(b);
      adj[ia].push_back(ib);
      adj[ib].push_back(ia);
    }
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (auto w : adj[u])
        if (!seen[w]) {
          seen[w] = 1;
          ++reached;
          stack.push_back(w);
        }
    }
    if (reached != n) throw std::invalid_argument("CubeSubgraph: not connected");
  }
};

// Dimensions in which the subgraph has an edge, as a bitmask (bit i-1 set for
// coordinate i) plus its popcount.
struct Support {
  std::uint64_t mask = 0;
  int span = 0;
};

inline Support support_and_span(const CubeSubgraph& h) {
  Support s;
  for (const auto& [a, b] : h.edges) s.mask |= (a ^ b);
  s.span = std::popcount(s.mask);
  return s;
}

// 1-based coordinate indices of a support mask.
inline std::vector<int> support_dims(std::uint64_t mask) {
  std::vector<int> dims;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1) dims.push_back(i + 1);
  return dims;
}

namespace detail {
inline Vertex compress_bits(Vertex x, std::uint64_t mask) {
  Vertex out = 0;
  int j = 0;
  while (mask != 0) {
    std::uint64_t low = mask & (~mask + 1);
    if (x & low) out |= (Vertex{1} << j);
    ++j;
    mask ^= low;
  }
  return out;
}
}  // namespace detail

// Canonical copy of a connected cube subgraph: project onto the support
// coordinates via the increasing relabeling. Lives in Q^span (Q^0 for a
// single vertex). Totally ordered by (size, span, vertex list, edge list), so
// forms serve as deterministic map keys.
struct CanonicalForm {
  int span = 0;
  std::vector<Vertex> vertices;
  EdgeList edges;

  std::size_t size() const { return vertices.size(); }

  CubeSubgraph as_subgraph() const {
    return CubeSubgraph::unchecked(span, vertices, edges);
  }

  std::string id() const {
    std::string s = "Q" + std::to_string(span) + "/v";
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(vertices[i]);
    }
    s += "/e";
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(edges[i].first) + "-" + std::to_string(edges[i].second);
    }
    return s;
  }

  friend std::strong_ordering operator<=>(const CanonicalForm& a, const CanonicalForm& b) {
    if (a.vertices.size() != b.vertices.size())
      return a.vertices.size() <=> b.vertices.size();
    if (a.span != b.span) return a.span <=> b.span;
    if (a.vertices != b.vertices) return a.vertices <=> b.vertices;
    return a.edges <=> b.edges;
  }
  bool operator==(const CanonicalForm&) const = default;
};

inline CanonicalForm canonical_copy(const CubeSubgraph& h) {
  Support s = support_and_span(h);
  CanonicalForm out;
  out.span = s.span;
  out.vertices.reserve(h.vertices.size());
  for (Vertex v : h.vertices) out.vertices.push_back(detail::compress_bits(v, s.mask));
  std::sort(out.vertices.begin(), out.vertices.end());
  out.edges.reserve(h.edges.size());
  for (const auto& [a, b] : h.edges) {
    Vertex ca = detail::compress_bits(a, s.mask);
    Vertex cb = detail::compress_bits(b, s.mask);
    if (ca > cb) std::swap(ca, cb);
    out.edges.emplace_back(ca, cb);
  }
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

inline CanonicalForm canonical_copy(const CanonicalForm& f) { return f; }

inline bool ambient_isomorphic(const CubeSubgraph& a, const CubeSubgraph& b) {
  return canonical_copy(a) == canonical_copy(b);
}

// e'(H): edges of the host cube with both endpoints in V(H) that are not
// edges of H. Independent of the ambient dimension, since members of a
// connected H agree on every non-support coordinate.
inline std::uint64_t internal_nonedges(const CubeSubgraph& h) {
  std::uint64_t cube_edges = 0;
  for (Vertex v : h.vertices) {
    for (int i = 0; i < h.d; ++i) {
      Vertex w = v ^ (Vertex{1} << i);
      if (w > v && h.contains(w)) ++cube_edges;
    }
  }
  return cube_edges - h.edges.size();
}

inline std::uint64_t internal_nonedges(const CanonicalForm& f) {
  return internal_nonedges(f.as_subgraph());
}

inline bool is_spreading_tree(const CubeSubgraph& h) {
  return static_cast<std::size_t>(support_and_span(h).span) == h.size() - 1;
}

inline bool is_spreading_tree(const CanonicalForm& f) {
  return static_cast<std::size_t>(f.span) == f.size() - 1;
}

inline nlohmann::ordered_json to_json(const CanonicalForm& f) {
  nlohmann::ordered_json j;
  j["t"] = f.vertices.size();
  j["s"] = f.span;
  j["vertices"] = f.vertices;
  nlohmann::ordered_json es = nlohmann::ordered_json::array();
  for (const auto& [a, b] : f.edges) es.push_back({a, b});
  j["edges"] = std::move(es);
  return j;
}

inline CanonicalForm form_from_json(const nlohmann::json& j) {
  std::vector<Vertex> vs = j.at("vertices").get<std::vector<Vertex>>();
  EdgeList es;
  for (const auto& e : j.at("edges"))
    es.emplace_back(e.at(0).get<Vertex>(), e.at(1).get<Vertex>());
  int span = j.at("s").get<int>();
  CanonicalForm f = canonical_copy(CubeSubgraph(span, vs, es));
  if (f.span != span || f.size() != j.at("t").get<std::size_t>())
    throw std::invalid_argument("form_from_json: record is not canonical");
  return f;
}

}  // namespace qpcube
