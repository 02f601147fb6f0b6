#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "qpcube/enumerate.hpp"
#include "qpcube/subgraph.hpp"
#include "testutil.hpp"

using namespace qpcube;

namespace {

CubeSubgraph single_vertex(int d, Vertex v) { return CubeSubgraph(d, {v}, {}); }

CubeSubgraph fig_path_q3() {
  // path (1,0,0) - (1,1,0) - (1,1,1): ids 1, 3, 7
  return CubeSubgraph(3, {1, 3, 7}, {{1, 3}, {3, 7}});
}

CubeSubgraph square_with_offset(int d, int dim_a, int dim_b, Vertex offset) {
  const Vertex a = Vertex{1} << dim_a, b = Vertex{1} << dim_b;
  std::vector<Vertex> vs{offset, offset | a, offset | b, offset | a | b};
  EdgeList es{{offset, offset | a},
              {offset, offset | b},
              {offset | a, offset | a | b},
              {offset | b, offset | a | b}};
  return CubeSubgraph(d, vs, es);
}

}  // namespace

TEST_CASE("construction: invariants enforced") {
  CHECK_THROWS_AS(CubeSubgraph(3, {0, 3}, {{0, 3}}), std::invalid_argument);  // distance 2
  CHECK_THROWS_AS(CubeSubgraph(3, {0, 1, 4}, {{0, 1}}), std::invalid_argument);  // disconnected
  CHECK_THROWS_AS(CubeSubgraph(3, {0, 1}, {{0, 2}}), std::invalid_argument);  // endpoint missing
  CHECK_THROWS_AS(CubeSubgraph(2, {0, 5}, {}), std::invalid_argument);  // id out of range
  CHECK_THROWS_AS(CubeSubgraph(3, {}, {}), std::invalid_argument);
}

TEST_CASE("support and span: examples") {
  auto [mask0, span0] = support_and_span(single_vertex(5, 17));
  CHECK(mask0 == 0);
  CHECK(span0 == 0);

  auto sup = support_and_span(fig_path_q3());
  CHECK(support_dims(sup.mask) == std::vector<int>{2, 3});
  CHECK(sup.span == 2);

  auto sq = support_and_span(square_with_offset(3, 0, 1, 4));
  CHECK(support_dims(sq.mask) == std::vector<int>{1, 2});
  CHECK(sq.span == 2);
}

TEST_CASE("canonical copy: pinned examples") {
  CanonicalForm fig = canonical_copy(fig_path_q3());
  CHECK(fig.span == 2);
  CHECK(fig.vertices == std::vector<Vertex>{0, 1, 3});
  CHECK(fig.edges == EdgeList{{0, 1}, {1, 3}});

  CanonicalForm v = canonical_copy(single_vertex(7, 99));
  CHECK(v.span == 0);
  CHECK(v.vertices == std::vector<Vertex>{0});
  CHECK(v.edges.empty());
  CHECK(v == canonical_copy(single_vertex(2, 3)));

  // path 0, e_j, e_i + e_j with i < j maps to (0,0),(0,1),(1,1)
  const int i = 1, j = 3;
  const Vertex ei = Vertex{1} << i, ej = Vertex{1} << j;
  CubeSubgraph hi(5, {0, ej, ei | ej}, {{0, ej}, {ej, ei | ej}});
  CanonicalForm ci = canonical_copy(hi);
  CHECK(ci.vertices == std::vector<Vertex>{0, 2, 3});
  CHECK(ci.edges == EdgeList{{0, 2}, {2, 3}});

  CubeSubgraph lo(5, {0, ei, ei | ej}, {{0, ei}, {ei, ei | ej}});
  CHECK(canonical_copy(lo).vertices == std::vector<Vertex>{0, 1, 3});
  CHECK_FALSE(ambient_isomorphic(hi, lo));
}

TEST_CASE("ambient isomorphism: reflexive, translation-invariant") {
  CubeSubgraph edge_a(4, {0, 1}, {{0, 1}});
  CubeSubgraph edge_b(4, {14, 15}, {{14, 15}});  // same edge on the opposite face
  CHECK(ambient_isomorphic(edge_a, edge_a));
  CHECK(ambient_isomorphic(edge_a, edge_b));
  CHECK(canonical_copy(edge_a).span == 1);
}

TEST_CASE("canonical copy: idempotent on random subgraphs") {
  testutil::Rng rng(11);
  for (int it = 0; it < 400; ++it) {
    const int d = 2 + static_cast<int>(rng.below(4));
    CubeSubgraph h = testutil::random_connected_subgraph(rng, d, 6);
    CanonicalForm f = canonical_copy(h);
    CHECK(canonical_copy(f.as_subgraph()) == f);
    CHECK(static_cast<std::size_t>(f.span) <= h.size() - 1);
    CHECK((static_cast<std::size_t>(f.span) == h.size() - 1) == is_spreading_tree(h));
  }
}

TEST_CASE("ambient isomorphism: equivalence spot-check on random triples") {
  testutil::Rng rng(23);
  for (int it = 0; it < 200; ++it) {
    const int d = 2 + static_cast<int>(rng.below(3));
    CubeSubgraph a = testutil::random_connected_subgraph(rng, d, 5);
    CubeSubgraph b = testutil::random_connected_subgraph(rng, d, 5);
    CubeSubgraph c = testutil::random_connected_subgraph(rng, d, 5);
    if (ambient_isomorphic(a, b) && ambient_isomorphic(b, c)) CHECK(ambient_isomorphic(a, c));
    CHECK(ambient_isomorphic(a, b) == ambient_isomorphic(b, a));
  }
}

TEST_CASE("internal nonedges") {
  // 3-edge path around a square: one closing edge missing
  CubeSubgraph open_square(2, {0, 1, 2, 3}, {{0, 1}, {1, 3}, {2, 3}});
  CHECK(internal_nonedges(open_square) == 1);
  CHECK(internal_nonedges(square_with_offset(2, 0, 1, 0)) == 0);
  // spreading path whose endpoints differ in 2 coordinates
  CubeSubgraph path(3, {0, 1, 3}, {{0, 1}, {1, 3}});
  CHECK(internal_nonedges(path) == 0);
  CHECK(internal_nonedges(single_vertex(4, 9)) == 0);
}

TEST_CASE("spreading trees") {
  CHECK(is_spreading_tree(CubeSubgraph(3, {0, 4}, {{0, 4}})));
  CHECK_FALSE(is_spreading_tree(square_with_offset(3, 0, 2, 2)));
  // 4-vertex path with two edges in dimension 1: span 2
  CubeSubgraph doubled(3, {0, 1, 3, 2}, {{0, 1}, {1, 3}, {2, 3}});
  CHECK(support_and_span(doubled).span == 2);
  CHECK_FALSE(is_spreading_tree(doubled));
}

TEST_CASE("subcube span: every cylinder subcube of Q^d has span = s") {
  for (int d = 2; d <= 5; ++d) {
    for (int s = 0; s <= std::min(3, d); ++s) {
      testutil::for_each_combination(d, s, [&](const std::vector<int>& dims) {
        const int rest = d - s;
        for (Vertex z = 0; z < (Vertex{1} << rest); ++z) {
          // scatter offset bits over the complement of dims
          Vertex base = 0;
          int k = 0;
          std::vector<bool> in_s(static_cast<std::size_t>(d), false);
          for (int i : dims) in_s[static_cast<std::size_t>(i)] = true;
          for (int i = 0; i < d; ++i) {
            if (in_s[static_cast<std::size_t>(i)]) continue;
            if (z & (Vertex{1} << k)) base |= Vertex{1} << i;
            ++k;
          }
          std::vector<Vertex> vs;
          EdgeList es;
          for (Vertex x = 0; x < (Vertex{1} << s); ++x) {
            Vertex v = base;
            for (int j = 0; j < s; ++j)
              if (x & (Vertex{1} << j)) v |= Vertex{1} << dims[static_cast<std::size_t>(j)];
            vs.push_back(v);
          }
          for (std::size_t a = 0; a < vs.size(); ++a)
            for (std::size_t b = a + 1; b < vs.size(); ++b)
              if (hamming(vs[a], vs[b]) == 1) es.emplace_back(vs[a], vs[b]);
          CubeSubgraph sub(d, vs, es);
          CHECK(support_and_span(sub).span == s);
        }
      });
      if (s == 0) {
        // for_each_combination skips k = 0; cover the single-vertex subcube directly
        CHECK(support_and_span(single_vertex(d, 0)).span == 0);
      }
    }
  }
}

TEST_CASE("enumerate_classes: small sizes") {
  CHECK(enumerate_classes(1).size() == 1);
  CHECK(enumerate_classes(2).size() == 1);
  auto three = enumerate_classes(3);
  CHECK(three.size() == 4);
  for (const auto& f : three) {
    CHECK(is_spreading_tree(f));
    CHECK(f.span == 2);
    CHECK(f.edges.size() == 2);
  }
  auto four = enumerate_classes(4);
  CHECK(four.size() == 37);  // 32 spreading trees + 4 open squares + the square
  std::size_t spreading = 0;
  for (const auto& f : four)
    if (is_spreading_tree(f)) ++spreading;
  CHECK(spreading == 32);
  CHECK_THROWS_AS(enumerate_classes(8), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_classes(0), std::invalid_argument);
}

TEST_CASE("enumerate_classes: deterministic order, matches brute scan") {
  auto a = enumerate_classes(4);
  auto b = enumerate_classes(4);
  CHECK(a == b);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1] < a[i]);
  // every class of size <= 4 has span <= 3, so the brute Q^3 scan sees them all
  for (int t = 1; t <= 4; ++t) {
    auto brute = testutil::brute_class_counts(3, t);
    auto classes = enumerate_classes(t);
    CHECK(brute.size() == classes.size());
    for (const auto& f : classes) CHECK(brute.count(f) == 1);
  }
}

TEST_CASE("enumerate_classes: recorded totals for t = 5, 6") {
  // golden values recorded in data/class_counts.json
  auto five = enumerate_classes(5);
  CHECK(five.size() == 544);
  std::size_t spreading5 = 0;
  for (const auto& f : five)
    if (is_spreading_tree(f)) ++spreading5;
  CHECK(spreading5 == 400);
  CHECK(enumerate_classes(6).size() == 11308);
}

TEST_CASE("count_embeddings: examples and brute cross-check in Q^3") {
  auto edge = enumerate_classes(2)[0];
  CHECK(count_embeddings(edge, 4).to_u64() == 32);  // edge count of Q^4
  CHECK(count_embeddings(edge, 1).to_u64() == 1);   // d = span
  for (int t = 1; t <= 3; ++t) {
    auto brute = testutil::brute_class_counts(3, t);
    for (const auto& [form, count] : brute)
      CHECK(count_embeddings(form, 3).to_u64() == count);
  }
  CHECK_THROWS_AS(count_embeddings(enumerate_classes(3)[0], 1), std::invalid_argument);
}

TEST_CASE("count_spreading_trees: formula values") {
  CHECK(count_spreading_trees(1, 5).classes.to_u64() == 1);
  CHECK(count_spreading_trees(2, 5).classes.to_u64() == 1);
  CHECK(count_spreading_trees(3, 5).classes.to_u64() == 4);
  CHECK(count_spreading_trees(4, 5).classes.to_u64() == 32);
  CHECK(count_spreading_trees(5, 5).classes.to_u64() == 400);
  CHECK(count_spreading_trees(6, 5).classes.to_u64() == 6912);
  CHECK(count_spreading_trees(1, 7).subgraphs.to_u64() == 128);      // isolated vertices
  CHECK(count_spreading_trees(2, 4).subgraphs.to_u64() == 32);       // edges of Q^4
  CHECK(count_spreading_trees(3, 3).subgraphs.to_u64() == 24);
  CHECK(count_spreading_trees(3, 3).subgraphs.to_u64() == testutil::brute_spreading_count(3, 3));
  CHECK_THROWS_AS(count_spreading_trees(5, 3), std::invalid_argument);
}

TEST_CASE("class totals: sum of embedding counts equals the brute total") {
  for (int d = 2; d <= 4; ++d) {
    for (int t = 1; t <= 4; ++t) {
      std::uint64_t brute_total = 0;
      for (const auto& [form, count] : testutil::brute_class_counts(d, t)) brute_total += count;
      BigUint formula_total;
      for (const auto& f : enumerate_classes(t))
        if (f.span <= d) formula_total += count_embeddings(f, d);
      CHECK(formula_total.to_u64() == brute_total);
    }
  }
}

TEST_CASE("rooted subtree counts stay below (e d)^t") {
  for (int d = 2; d <= 4; ++d) {
    for (int t = 1; t <= 4; ++t) {
      const double bound = std::pow(std::exp(1.0) * d, t);
      CHECK(static_cast<double>(testutil::brute_rooted_subtrees(d, 0, t)) <= bound);
    }
  }
}

TEST_CASE("canonical form: json round trip and stable ids") {
  auto forms = enumerate_classes(3);
  for (const auto& f : forms) {
    auto j = to_json(f);
    CHECK(form_from_json(nlohmann::json::parse(j.dump())) == f);
  }
  CHECK(canonical_copy(single_vertex(3, 5)).id() == "Q0/v0/e");
  CHECK(canonical_copy(CubeSubgraph(4, {0, 2}, {{0, 2}})).id() == "Q1/v0,1/e0-1");
  auto j = to_json(forms[0]);
  CHECK(j.at("t") == 3);
  CHECK(j.at("s") == 2);
}
