#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "qpcube/oracle.hpp"
#include "qpcube/sampler.hpp"
#include "testutil.hpp"

using namespace qpcube;

TEST_CASE("threshold: floor semantics, exact for decimals") {
  CHECK(threshold_from_p(0.0) == 0);
  CHECK(threshold_from_p(1.0) == ~std::uint64_t{0});
  CHECK(threshold_from_p(0.5) == (std::uint64_t{1} << 63));
  CHECK(threshold_from_p(DecimalProb::parse("0.5")) == (std::uint64_t{1} << 63));
  // 0.25 = 2^62 exactly either way
  CHECK(threshold_from_p(0.25) == (std::uint64_t{1} << 62));
  CHECK(threshold_from_p(DecimalProb::parse("0.25")) == (std::uint64_t{1} << 62));
  // floor(0.3 * 2^64)
  CHECK(threshold_from_p(DecimalProb::parse("0.3")) == 5534023222112865484ull);
  CHECK_THROWS_AS(threshold_from_p(1.5), std::invalid_argument);
}

TEST_CASE("edge_present: endpoint symmetry and threshold edges") {
  testutil::Rng rng(99);
  for (int it = 0; it < 5000; ++it) {
    const int d = 1 + static_cast<int>(rng.below(30));
    SampleSpec spec(d, rng.next_u64(), rng.next_u64(), rng.below(1000));
    const Vertex v = rng.next_u64() & ((Vertex{1} << d) - 1);
    const int dim = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
    CHECK(edge_present(spec, v, dim) == edge_present(spec, v ^ (Vertex{1} << dim), dim));
  }
  SampleSpec zero(8, 0, 42, 0);
  SampleSpec full(8, ~std::uint64_t{0}, 42, 0);
  int present_zero = 0, absent_full = 0;
  for (Vertex v = 0; v < 256; ++v)
    for (int i = 0; i < 8; ++i) {
      if ((v >> i) & 1) continue;
      if (edge_present(zero, v, i)) ++present_zero;
      if (!edge_present(full, v, i)) ++absent_full;
    }
  CHECK(present_zero == 0);
  // threshold 2^64 - 1 misses only hashes equal to 2^64 - 1
  CHECK(absent_full <= 1);
}

TEST_CASE("wire format: pinned hash values never drift") {
  // The sampled graph is an external contract; these goldens pin the exact
  // mixing pipeline (SplitMix64 finalizer, trial seeding, edge keying).
  CHECK(mix64(0) == 0);
  CHECK(mix64(42) == 12058926934050108962ull);
  CHECK(trial_seed(42, 0) == 6756303123087779718ull);
  CHECK(trial_seed(42, 1) == 9351518262514500345ull);
  SampleSpec s(16, threshold_from_p(DecimalProb::parse("0.25")), 42, 0);
  std::uint64_t bits = 0;
  for (int i = 0; i < 64; ++i)
    bits = (bits << 1) |
           (edge_present(s, static_cast<Vertex>(i * 37 % 65536), i % 16) ? 1u : 0u);
  CHECK(bits == 0x038851201a004420ull);
}

TEST_CASE("edge_present: per-edge rate across trials") {
  // one fixed edge across independent trials behaves like Bernoulli(p)
  const std::uint64_t thr = threshold_from_p(DecimalProb::parse("0.3"));
  std::uint64_t count = 0;
  const std::uint64_t n = 20000;
  for (std::uint64_t trial = 0; trial < n; ++trial) {
    SampleSpec s(12, thr, 555, trial);
    if (edge_present(s, 100, 5)) ++count;
  }
  const double sigma = std::sqrt(n * 0.3 * 0.7);
  CHECK(std::fabs(static_cast<double>(count) - n * 0.3) <= 4.0 * sigma);
}

TEST_CASE("edge_present: empirical density within 4 sigma at d=16, p=0.25") {
  Params params(16, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 42, 0);
  std::uint64_t count = 0, edges = 0;
  for (Vertex v = 0; v < (Vertex{1} << 16); ++v)
    for (int i = 0; i < 16; ++i) {
      if ((v >> i) & 1) continue;
      ++edges;
      if (edge_present(spec, v, i)) ++count;
    }
  const double mean = static_cast<double>(edges) * 0.25;
  const double sigma = std::sqrt(static_cast<double>(edges) * 0.25 * 0.75);
  CHECK(std::fabs(static_cast<double>(count) - mean) <= 4.0 * sigma);
}

TEST_CASE("census: empty and full graphs") {
  SampleSpec empty(6, 0, 7, 0);
  auto census = component_census(empty, 4);
  CHECK(census.x_total == 64);
  CHECK(census.size_histogram.at(1) == 64);
  CHECK(census.l1 == 1);
  CHECK(census.l2 == 1);
  CHECK(census.z == 63);
  CHECK(census.giant_root == 0);  // smallest-id tie rule
  CHECK(census.fragment_components.size() == 63);

  SampleSpec full(6, ~std::uint64_t{0}, 7, 0);
  auto fc = component_census(full, 4);
  CHECK(fc.x_total == 1);
  CHECK(fc.l1 == 64);
  CHECK(fc.l2 == 0);
  CHECK(fc.z == 0);
  CHECK(fc.fragment_components.empty());
}

TEST_CASE("census: invariants over fuzzed specs") {
  testutil::Rng rng(123);
  for (int it = 0; it < 10000; ++it) {
    const int d = 2 + static_cast<int>(rng.below(11));
    SampleSpec spec(d, rng.next_u64(), rng.next_u64(), rng.below(100));
    auto census = component_census(spec, 0);
    const std::uint64_t n = std::uint64_t{1} << d;
    std::uint64_t mass = 0, count = 0;
    for (const auto& [size, c] : census.size_histogram) {
      mass += size * c;
      count += c;
    }
    CHECK(mass == n);
    CHECK(count == census.x_total);
    CHECK(census.z == n - census.l1);
    CHECK(census.l1 >= census.l2);
    CHECK((census.x_total == 1) == (census.l2 == 0));
  }
}

TEST_CASE("census: pure function of the sample spec") {
  Params params(12, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 2024, 5);
  auto a = component_census(spec, 64);
  auto b = component_census(spec, 64);
  CHECK(a == b);
}

TEST_CASE("monotone coupling: raising the threshold only adds edges") {
  const std::uint64_t t_lo = threshold_from_p(DecimalProb::parse("0.2"));
  const std::uint64_t t_hi = threshold_from_p(DecimalProb::parse("0.35"));
  SampleSpec lo(10, t_lo, 77, 3), hi(10, t_hi, 77, 3);
  for (Vertex v = 0; v < (Vertex{1} << 10); ++v)
    for (int i = 0; i < 10; ++i) {
      if ((v >> i) & 1) continue;
      if (edge_present(lo, v, i)) CHECK(edge_present(hi, v, i));
    }
}

TEST_CASE("classify_fragment: degenerate and consistency cases") {
  SampleSpec empty(6, 0, 1, 0);
  auto census = component_census(empty, 8);
  auto cls = classify_fragment(census);
  CHECK(cls.counts.size() == 1);
  CHECK(cls.counts.begin()->first.size() == 1);
  CHECK(cls.counts.begin()->second == 63);
  CHECK(cls.oversize == 0);

  Params params(14, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 9, 0);
  auto real_census = component_census(spec, 64);
  auto real_cls = classify_fragment(real_census);
  std::uint64_t twos = 0;
  for (const auto& [form, count] : real_cls.counts)
    if (form.size() == 2) twos += count;
  const auto it = real_census.size_histogram.find(2);
  CHECK(twos == (it == real_census.size_histogram.end() ? 0 : it->second));
}

TEST_CASE("distance profile: hand cases via the mask interface") {
  // single vertex: profile r = C(d, r)
  for (int d : {3, 6, 8}) {
    std::vector<std::uint64_t> mask(((std::uint64_t{1} << d) + 63) / 64, 0);
    mask[0] = 1;  // vertex 0
    auto prof = distance_profile_from_mask(mask, d);
    REQUIRE(prof.counts.size() == static_cast<std::size_t>(d) + 1);
    for (int r = 0; r <= d; ++r)
      CHECK(prof.counts[static_cast<std::size_t>(r)] == ball_volume(d, r).to_u64() -
                (r == 0 ? 0 : ball_volume(d, r - 1).to_u64()));
    CHECK(prof.max_distance == d);
  }
  // two antipodal vertices of Q^3: [2, 6, 0, 0]
  std::vector<std::uint64_t> anti(1, 0);
  anti[0] = (1ull << 0) | (1ull << 7);
  auto prof = distance_profile_from_mask(anti, 3);
  CHECK(prof.counts == std::vector<std::uint64_t>{2, 6, 0, 0});
  CHECK(prof.max_distance == 1);
}

TEST_CASE("distance profile: sampled census") {
  Params params(10, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 31, 2);
  auto census = component_census(spec, 64);
  auto prof = fragment_distance_profile(census, spec);
  if (census.z == 0) {
    CHECK(prof.fragment_empty);
  } else {
    CHECK(prof.counts[0] == census.z);
    std::uint64_t total = 0;
    for (auto c : prof.counts) total += c;
    CHECK(total == (std::uint64_t{1} << 10));
  }
  // empty fragment flag
  SampleSpec full(6, ~std::uint64_t{0}, 3, 0);
  auto full_census = component_census(full, 4);
  CHECK(fragment_distance_profile(full_census, full).fragment_empty);
}

TEST_CASE("goodness diagnostic: degenerate ends") {
  SampleSpec full(8, ~std::uint64_t{0}, 5, 0);
  auto census = component_census(full, 4);
  auto good = goodness_diagnostic(census, full, 0.999);
  CHECK(good.bad_vertex_count == 0);
  CHECK(good.good_all_in_giant);
  CHECK(good.l2_within_n_gamma);

  // empty sampled graph at positive p: degree 0 < d p / 2 everywhere
  SampleSpec empty(8, 0, 5, 0);
  auto ec = component_census(empty, 0);
  auto eg = goodness_diagnostic(ec, empty, 0.25);
  CHECK(eg.bad_vertex_count == 256);
  CHECK(eg.good_all_in_giant);  // vacuous: no good vertices

  Params params(12, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 400, 0);
  auto rc = component_census(spec, 64);
  auto rg = goodness_diagnostic(rc, spec, 0.25, 3.0);
  CHECK(rg.n_gamma == 256);
  CHECK(rg.max_fragment_size == rc.l2);
}

TEST_CASE("ball cluster statistic") {
  // one stored component of size 3 (a path), plus a far-away singleton
  ComponentCensus census;
  census.d = 6;
  census.fragment_components.push_back(
      CubeSubgraph(6, {0, 1, 3}, {{0, 1}, {1, 3}}));
  census.fragment_components.push_back(CubeSubgraph(6, {62}, {}));  // > 2r from the path
  auto stats = ball_cluster_statistic(census, 2);
  CHECK(stats.max_in_ball_at_fragment_vertex == 3);  // radius covers the path diameter
  CHECK(stats.max_within_double_radius == 3);
  // the same census classifies into one 3-vertex and one 1-vertex class
  auto cls = classify_fragment(census);
  CHECK(cls.counts.size() == 2);
  for (const auto& [form, count] : cls.counts) CHECK(count == 1);
  auto tight = ball_cluster_statistic(census, 0);
  CHECK(tight.max_in_ball_at_fragment_vertex == 1);

  ComponentCensus overs;
  overs.d = 6;
  overs.oversize_sizes.push_back(70);
  CHECK_THROWS_AS(ball_cluster_statistic(overs, 1), std::invalid_argument);
}

TEST_CASE("census distribution at d=3 approaches the oracle law") {
  // light version of the acceptance check: 1e5 trials, TV <= 0.02
  const int d = 3;
  Params params(d, std::string("0.3"));
  std::map<std::uint64_t, double> oracle;
  for (const auto& [key, prob] : oracle_size_vector_law(d, 0.3)) {
    std::uint64_t packed = 0;
    for (std::size_t t = 0; t < key.size(); ++t)
      packed |= static_cast<std::uint64_t>(key[t]) << (4 * t);
    oracle[packed] += prob;
  }
  const std::uint64_t trials = 100000;
  std::map<std::uint64_t, std::uint64_t> hist;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    SampleSpec spec = make_sample_spec(params, 4242, trial);
    auto census = component_census(spec, 0);
    std::uint64_t packed = 0;
    for (const auto& [size, count] : census.size_histogram)
      packed |= count << (4 * (size - 1));
    ++hist[packed];
  }
  double tv = 0.0;
  for (const auto& [key, prob] : oracle) {
    const auto it = hist.find(key);
    const double emp = it == hist.end() ? 0.0
                                        : static_cast<double>(it->second) /
                                              static_cast<double>(trials);
    tv += std::fabs(emp - prob);
  }
  for (const auto& [key, count] : hist)
    if (!oracle.count(key)) tv += static_cast<double>(count) / static_cast<double>(trials);
  tv *= 0.5;
  CHECK(tv <= 0.02);
}

TEST_CASE("census json: schema fields") {
  Params params(8, std::string("0.25"));
  SampleSpec spec = make_sample_spec(params, 1, 2);
  auto census = component_census(spec, 16);
  auto j = census_to_json(census, "0.25");
  CHECK(j.at("d") == 8);
  CHECK(j.at("p") == "0.25");
  CHECK(j.at("seed") == 1);
  CHECK(j.at("trial") == 2);
  CHECK(j.at("X").get<std::uint64_t>() == census.x_total);
  CHECK(j.at("Z").get<std::uint64_t>() == census.z);
  CHECK(j.contains("sizes_histogram"));
  CHECK(j.contains("classes"));
  CHECK(j.contains("oversize"));
}

TEST_CASE("census: dimension cap enforced") {
  SampleSpec spec(20, 123, 5, 0);
  CHECK_THROWS_AS(component_census(spec, 0, 16), std::invalid_argument);
}
