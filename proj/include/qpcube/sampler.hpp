#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "qpcube/cube.hpp"
#include "qpcube/subgraph.hpp"

namespace qpcube {

// SplitMix64 finalizer. Fixed bit-exactly: together with the canonical edge
// id below it defines the sampled graph for a given (master_seed, trial),
// identically on every platform and thread count.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
  return mix64(master_seed ^ mix64(trial_index + 0x632BE59BD9B4E019ull));
}

// floor(p * 2^64); an edge is present iff its hash is below the threshold.
inline std::uint64_t threshold_from_p(double p) {
  if (!(p >= 0.0) || !(p <= 1.0))
    throw std::invalid_argument("threshold_from_p: p must be in [0,1]");
  if (p <= 0.0) return 0;
  long double scaled = std::floor(static_cast<long double>(p) * 18446744073709551616.0L);
  if (scaled >= 18446744073709551616.0L) return ~std::uint64_t{0};
  return static_cast<std::uint64_t>(scaled);
}

inline std::uint64_t threshold_from_p(const DecimalProb& p) {
  unsigned __int128 num = p.numerator;
  return static_cast<std::uint64_t>((num << 64) / p.pow10());
}

// One sampled graph Q_p^d: identical spec implies an identical edge set.
struct SampleSpec {
  int d = 0;
  std::uint64_t threshold = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
  std::uint64_t seed = 0;  // trial_seed(master_seed, trial_index)

  SampleSpec(int dim, std::uint64_t thr, std::uint64_t master, std::uint64_t trial)
      : d(dim), threshold(thr), master_seed(master), trial_index(trial),
        seed(trial_seed(master, trial)) {
    if (d < 1 || d > kMaxDimension) throw std::invalid_argument("SampleSpec: bad dimension");
  }
};

inline SampleSpec make_sample_spec(const Params& params, std::uint64_t master_seed,
                                   std::uint64_t trial_index) {
  std::uint64_t thr = params.decimal ? threshold_from_p(*params.decimal)
                                     : threshold_from_p(params.p);
  return SampleSpec(params.d, thr, master_seed, trial_index);
}

// Presence of the edge {v, v ^ 2^dim}, keyed by the canonical edge id
// (min endpoint, dim). Symmetric in endpoint order by construction.
inline bool edge_present(const SampleSpec& spec, Vertex v, int dim) {
  Vertex w = v ^ (Vertex{1} << dim);
  Vertex lo = v < w ? v : w;
  std::uint64_t h = mix64(mix64(lo ^ spec.seed) ^
                          (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(dim + 1)));
  return h < spec.threshold;
}

// Full component census of one sampled graph. Fragment components of size at
// most fragment_store_cap are kept explicitly; anything larger (other than
// the giant) is tallied in oversize_sizes.
struct ComponentCensus {
  int d = 0;
  std::uint64_t threshold = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;
  std::uint64_t fragment_store_cap = 0;

  std::map<std::uint64_t, std::uint64_t> size_histogram;  // size -> X_size
  std::uint64_t x_total = 0;
  std::uint64_t l1 = 0;
  std::uint64_t l2 = 0;
  std::uint64_t z = 0;
  Vertex giant_root = 0;  // smallest vertex of the giant component
  std::vector<CubeSubgraph> fragment_components;
  std::vector<std::uint64_t> oversize_sizes;

  bool operator==(const ComponentCensus&) const = default;
};

namespace detail {

class Bitset {
 public:
  explicit Bitset(std::uint64_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}
  bool test(std::uint64_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  void set(std::uint64_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void reset_all() { std::fill(words_.begin(), words_.end(), 0); }
  std::uint64_t count() const {
    std::uint64_t c = 0;
    for (auto w : words_) c += static_cast<std::uint64_t>(std::popcount(w));
    return c;
  }
  std::vector<std::uint64_t>& words() { return words_; }
  const std::vector<std::uint64_t>& words() const { return words_; }
  std::uint64_t size_bits() const { return bits_; }

 private:
  std::uint64_t bits_;
  std::vector<std::uint64_t> words_;
};

// out |= all cube neighbors of in; word-level: low dimensions are in-word bit
// permutations, high dimensions are word swaps.
inline void expand_cube_neighbors(std::vector<std::uint64_t>& out,
                                  const std::vector<std::uint64_t>& in, int d) {
  static constexpr std::uint64_t lane[6] = {
      0x5555555555555555ull, 0x3333333333333333ull, 0x0F0F0F0F0F0F0F0Full,
      0x00FF00FF00FF00FFull, 0x0000FFFF0000FFFFull, 0x00000000FFFFFFFFull};
  const std::size_t nw = in.size();
  const int low = std::min(d, 6);
  for (int i = 0; i < low; ++i) {
    const int s = 1 << i;
    const std::uint64_t m = lane[i];
    for (std::size_t w = 0; w < nw; ++w) {
      const std::uint64_t x = in[w];
      out[w] |= ((x & m) << s) | ((x >> s) & m);
    }
  }
  for (int i = 6; i < d; ++i) {
    const std::size_t stride = std::size_t{1} << (i - 6);
    for (std::size_t w = 0; w < nw; ++w) out[w ^ stride] |= in[w];
  }
}

struct RawComponent {
  std::uint64_t size = 0;
  Vertex root = 0;  // minimum vertex
  std::vector<Vertex> verts;  // only when size <= store cap
};

// BFS over one component starting at root. Queue-based while small; spills to
// frontier bitsets when the queue outgrows the limit (the giant at large d).
inline RawComponent bfs_component(const SampleSpec& spec, Vertex root, Bitset& visited,
                                  std::uint64_t store_cap) {
  static constexpr std::size_t kQueueLimit = std::size_t{1} << 15;
  const int d = spec.d;
  RawComponent comp;
  comp.root = root;
  std::vector<Vertex> queue{root};
  visited.set(root);
  comp.size = 1;
  if (store_cap >= 1) comp.verts.push_back(root);
  std::size_t head = 0;
  while (head < queue.size()) {
    if (queue.size() - head > kQueueLimit) break;
    Vertex v = queue[head++];
    for (int i = 0; i < d; ++i) {
      Vertex w = v ^ (Vertex{1} << i);
      if (visited.test(w)) continue;
      if (!edge_present(spec, v, i)) continue;
      visited.set(w);
      ++comp.size;
      if (comp.size <= store_cap) comp.verts.push_back(w);
      queue.push_back(w);
    }
  }
  if (head >= queue.size()) return comp;

  // bitset mode for the remainder
  const std::uint64_t n = std::uint64_t{1} << d;
  Bitset frontier(n), next(n);
  for (std::size_t k = head; k < queue.size(); ++k) frontier.set(queue[k]);
  queue.clear();
  for (;;) {
    bool any = false;
    const auto& fw = frontier.words();
    for (std::size_t w = 0; w < fw.size(); ++w) {
      std::uint64_t bits = fw[w];
      while (bits != 0) {
        const int b = std::countr_zero(bits);
        bits &= bits - 1;
        const Vertex v = (static_cast<Vertex>(w) << 6) | static_cast<Vertex>(b);
        for (int i = 0; i < d; ++i) {
          Vertex u = v ^ (Vertex{1} << i);
          if (visited.test(u)) continue;
          if (!edge_present(spec, v, i)) continue;
          visited.set(u);
          next.set(u);
          ++comp.size;
          if (comp.size <= store_cap) comp.verts.push_back(u);
          any = true;
        }
      }
    }
    if (!any) break;
    frontier.words().swap(next.words());
    next.reset_all();
  }
  return comp;
}

}  // namespace detail

// Exact census by repeated BFS over unvisited vertices, adjacency generated on
// the fly from edge_present. Working set is ~3 * 2^d bits.
inline ComponentCensus component_census(const SampleSpec& spec,
                                        std::uint64_t fragment_store_cap = 64,
                                        int d_cap = 30) {
  if (spec.d > d_cap)
    throw std::invalid_argument("component_census: dimension exceeds memory cap");
  const std::uint64_t n = std::uint64_t{1} << spec.d;
  detail::Bitset visited(n);
  std::vector<detail::RawComponent> comps;
  auto& vw = visited.words();
  for (std::size_t w = 0; w < vw.size(); ++w) {
    while (vw[w] != ~std::uint64_t{0}) {
      const std::uint64_t free_bits = ~vw[w];
      const Vertex v =
          (static_cast<Vertex>(w) << 6) | static_cast<Vertex>(std::countr_zero(free_bits));
      if (v >= n) break;
      comps.push_back(detail::bfs_component(spec, v, visited, fragment_store_cap));
    }
  }

  ComponentCensus census;
  census.d = spec.d;
  census.threshold = spec.threshold;
  census.master_seed = spec.master_seed;
  census.trial_index = spec.trial_index;
  census.fragment_store_cap = fragment_store_cap;
  census.x_total = comps.size();

  std::size_t giant = 0;
  for (std::size_t i = 1; i < comps.size(); ++i)
    if (comps[i].size > comps[giant].size) giant = i;  // first max = smallest root
  census.l1 = comps[giant].size;
  census.giant_root = comps[giant].root;
  census.z = n - census.l1;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    ++census.size_histogram[comps[i].size];
    if (i == giant) continue;
    if (comps[i].size > census.l2) census.l2 = comps[i].size;
    if (comps[i].size <= fragment_store_cap) {
      // edges from membership probes among the stored vertices
      std::vector<Vertex> vs = comps[i].verts;
      std::sort(vs.begin(), vs.end());
      EdgeList es;
      for (Vertex v : vs)
        for (int k = 0; k < spec.d; ++k) {
          Vertex u = v ^ (Vertex{1} << k);
          if (u > v && std::binary_search(vs.begin(), vs.end(), u) &&
              edge_present(spec, v, k))
            es.emplace_back(v, u);
        }
      census.fragment_components.push_back(
          CubeSubgraph::unchecked(spec.d, std::move(vs), std::move(es)));
    } else {
      census.oversize_sizes.push_back(comps[i].size);
    }
  }
  std::sort(census.oversize_sizes.begin(), census.oversize_sizes.end());

  // internal consistency
  std::uint64_t mass = 0, count = 0;
  for (const auto& [size, cnt] : census.size_histogram) {
    mass += size * cnt;
    count += cnt;
  }
  if (mass != n || count != census.x_total || census.z != n - census.l1)
    throw std::logic_error("component_census: invariant violation");
  return census;
}

struct FragmentClassification {
  std::map<CanonicalForm, std::uint64_t> counts;
  std::uint64_t oversize = 0;
};

// Canonicalize and tally every stored fragment component; components beyond
// the store cap only contribute to the oversize count.
inline FragmentClassification classify_fragment(const ComponentCensus& census) {
  FragmentClassification out;
  for (const auto& comp : census.fragment_components) ++out.counts[canonical_copy(comp)];
  out.oversize = census.oversize_sizes.size();
  return out;
}

// Vertex set of the giant component, reconstructed by BFS from its root.
inline detail::Bitset giant_mask(const ComponentCensus& census, const SampleSpec& spec) {
  const std::uint64_t n = std::uint64_t{1} << spec.d;
  detail::Bitset visited(n);
  detail::bfs_component(spec, census.giant_root, visited, 0);
  return visited;
}

struct DistanceProfile {
  bool fragment_empty = false;
  std::vector<std::uint64_t> counts;  // counts[r] = #vertices at distance exactly r; d+1 entries
  int max_distance = -1;
};

// Level-synchronous BFS in the full host cube from every set bit of the
// source mask. counts has d+1 entries summing to 2^d.
inline DistanceProfile distance_profile_from_mask(std::vector<std::uint64_t> covered, int d) {
  DistanceProfile out;
  const std::uint64_t n = std::uint64_t{1} << d;
  if ((n & 63) != 0) covered.back() &= (std::uint64_t{1} << (n & 63)) - 1;
  auto popcount_words = [](const std::vector<std::uint64_t>& ws) {
    std::uint64_t c = 0;
    for (auto w : ws) c += static_cast<std::uint64_t>(std::popcount(w));
    return c;
  };
  std::uint64_t reached = popcount_words(covered);
  if (reached == 0) {
    out.fragment_empty = true;
    return out;
  }
  out.counts.push_back(reached);
  std::vector<std::uint64_t> grown(covered.size());
  while (reached < n) {
    grown = covered;
    detail::expand_cube_neighbors(grown, covered, d);
    if ((n & 63) != 0) grown.back() &= (std::uint64_t{1} << (n & 63)) - 1;
    std::uint64_t now = popcount_words(grown);
    out.counts.push_back(now - reached);
    covered.swap(grown);
    reached = now;
  }
  out.max_distance = static_cast<int>(out.counts.size()) - 1;
  out.counts.resize(static_cast<std::size_t>(d) + 1, 0);
  return out;
}

// Multi-source BFS in the full host cube from every fragment vertex. Entry 0
// equals Z; entries sum to 2^d.
inline DistanceProfile fragment_distance_profile(const ComponentCensus& census,
                                                 const SampleSpec& spec) {
  if (census.z == 0) {
    DistanceProfile out;
    out.fragment_empty = true;
    return out;
  }
  detail::Bitset giant = giant_mask(census, spec);
  std::vector<std::uint64_t> covered = giant.words();
  for (auto& w : covered) w = ~w;
  return distance_profile_from_mask(std::move(covered), spec.d);
}

struct GoodnessReport {
  std::uint64_t bad_vertex_count = 0;   // sampled degree < d p / 2
  bool good_all_in_giant = true;
  std::uint64_t max_fragment_size = 0;  // = L2
  std::uint64_t n_gamma = 0;            // floor(16 (1 + gamma) / p)
  bool l2_within_n_gamma = false;
};

inline GoodnessReport goodness_diagnostic(const ComponentCensus& census, const SampleSpec& spec,
                                          double p, double gamma = 3.0) {
  GoodnessReport out;
  const std::uint64_t n = std::uint64_t{1} << spec.d;
  const double cutoff = spec.d * p / 2.0;
  detail::Bitset giant = giant_mask(census, spec);
  for (Vertex v = 0; v < n; ++v) {
    int deg = 0;
    for (int i = 0; i < spec.d; ++i)
      if (edge_present(spec, v, i)) ++deg;
    if (static_cast<double>(deg) < cutoff) {
      ++out.bad_vertex_count;
    } else if (!giant.test(v)) {
      out.good_all_in_giant = false;
    }
  }
  out.max_fragment_size = census.l2;
  out.n_gamma = p > 0.0 ? static_cast<std::uint64_t>(std::floor(16.0 * (1.0 + gamma) / p))
                        : ~std::uint64_t{0};
  out.l2_within_n_gamma = census.l2 <= out.n_gamma;
  return out;
}

struct BallClusterStats {
  // max over fragment vertices u of #{fragment vertices within radius of u};
  // a lower bound on the max ball occupancy over all centers.
  std::uint64_t max_in_ball_at_fragment_vertex = 0;
  // same with radius 2r; upper-bounds the occupancy of any r-ball that
  // contains the witnessing vertex.
  std::uint64_t max_within_double_radius = 0;
};

inline BallClusterStats ball_cluster_statistic(const ComponentCensus& census, int radius,
                                               std::uint64_t pair_cap = 100000000ull) {
  if (radius < 0) throw std::invalid_argument("ball_cluster_statistic: negative radius");
  if (!census.oversize_sizes.empty())
    throw std::invalid_argument("ball_cluster_statistic: fragment not fully stored");
  std::vector<Vertex> frag;
  for (const auto& comp : census.fragment_components)
    frag.insert(frag.end(), comp.vertices.begin(), comp.vertices.end());
  if (frag.size() * frag.size() > pair_cap)
    throw std::invalid_argument("ball_cluster_statistic: fragment exceeds pairwise cap");
  BallClusterStats out;
  for (std::size_t i = 0; i < frag.size(); ++i) {
    std::uint64_t near = 0, twice = 0;
    for (std::size_t j = 0; j < frag.size(); ++j) {
      const int dist = hamming(frag[i], frag[j]);
      if (dist <= radius) ++near;
      if (dist <= 2 * radius) ++twice;
    }
    out.max_in_ball_at_fragment_vertex = std::max(out.max_in_ball_at_fragment_vertex, near);
    out.max_within_double_radius = std::max(out.max_within_double_radius, twice);
  }
  return out;
}

// Census wire format used in reports and by the analyze command.
inline nlohmann::ordered_json census_to_json(const ComponentCensus& census,
                                             const std::string& p_text) {
  nlohmann::ordered_json j;
  j["d"] = census.d;
  j["p"] = p_text;
  j["seed"] = census.master_seed;
  j["trial"] = census.trial_index;
  nlohmann::ordered_json hist = nlohmann::ordered_json::object();
  for (const auto& [size, count] : census.size_histogram)
    hist[std::to_string(size)] = count;
  j["sizes_histogram"] = std::move(hist);
  j["L1"] = census.l1;
  j["L2"] = census.l2;
  j["Z"] = census.z;
  j["X"] = census.x_total;
  FragmentClassification cls = classify_fragment(census);
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& [form, count] : cls.counts) {
    nlohmann::ordered_json rec;
    rec["form_id"] = form.id();
    rec["count"] = count;
    classes.push_back(std::move(rec));
  }
  j["classes"] = std::move(classes);
  j["oversize"] = cls.oversize;
  return j;
}

}  // namespace qpcube
