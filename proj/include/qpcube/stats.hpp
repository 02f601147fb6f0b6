#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qpcube/expectations.hpp"
#include "qpcube/oracle.hpp"
#include "qpcube/sampler.hpp"

namespace qpcube {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// numeric formatting: all report floats round-trip through 12 significant
// digits so identical configurations serialize byte-identically.

inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline double round12(double v) { return std::strtod(fmt12(v).c_str(), nullptr); }

// ---------------------------------------------------------------------------
// Poisson helpers

inline double poisson_logpmf(std::int64_t k, double lambda) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(k) * std::log(lambda) - lambda - std::lgamma(static_cast<double>(k) + 1.0);
}

inline double poisson_pmf(std::int64_t k, double lambda) {
  return std::exp(poisson_logpmf(k, lambda));
}

// smallest K with P(Po(lambda) > K) <= tail
inline std::int64_t poisson_upper_quantile(double lambda, double tail) {
  double cum = 0.0;
  std::int64_t k = 0;
  const std::int64_t hard = static_cast<std::int64_t>(lambda + 40.0 * std::sqrt(lambda + 1.0) + 64.0);
  for (; k <= hard; ++k) {
    cum += poisson_pmf(k, lambda);
    if (1.0 - cum <= tail) return k;
  }
  return hard;
}

// d_TV between an exact law and Po(lambda); the Poisson tail beyond the
// scanned range is folded into the reported value, keeping it conservative.
inline double tv_law_poisson(const ExactLaw& law, double lambda) {
  std::int64_t kmax = poisson_upper_quantile(lambda, 1e-15);
  if (!law.pmf.empty()) kmax = std::max(kmax, law.pmf.rbegin()->first);
  double sum = 0.0, poisson_mass = 0.0;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const double po = poisson_pmf(k, lambda);
    poisson_mass += po;
    auto it = law.pmf.find(k);
    const double pl = it == law.pmf.end() ? 0.0 : it->second;
    sum += std::fabs(pl - po);
  }
  return 0.5 * sum + std::max(0.0, 1.0 - poisson_mass);
}

// d_TV(empirical law of integer samples, Po(lambda)); scans the union of the
// empirical support and the Poisson bulk (tail below 1e-12 folded in).
inline double empirical_tv_to_poisson(const std::vector<std::int64_t>& samples, double lambda) {
  if (samples.empty()) throw std::invalid_argument("empirical_tv_to_poisson: no samples");
  if (!(lambda > 0.0)) throw std::invalid_argument("empirical_tv_to_poisson: lambda must be > 0");
  std::map<std::int64_t, std::uint64_t> counts;
  for (auto s : samples) ++counts[s];
  const double n = static_cast<double>(samples.size());
  std::int64_t kmax = std::max(poisson_upper_quantile(lambda, 1e-12), counts.rbegin()->first);
  double sum = 0.0, poisson_mass = 0.0;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const double po = poisson_pmf(k, lambda);
    poisson_mass += po;
    auto it = counts.find(k);
    const double ph = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
    sum += std::fabs(ph - po);
  }
  return 0.5 * sum + std::max(0.0, 1.0 - poisson_mass);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov distance of the standardized samples to the
// standard normal. Standardizes internally; zero variance is an error.
inline double ks_normal_check(const std::vector<double>& raw) {
  if (raw.size() < 100) throw std::invalid_argument("ks_normal_check: need >= 100 samples");
  double mean = 0.0;
  for (double x : raw) mean += x;
  mean /= static_cast<double>(raw.size());
  double var = 0.0;
  for (double x : raw) var += (x - mean) * (x - mean);
  var /= static_cast<double>(raw.size() - 1);
  if (!(var > 0.0)) throw std::invalid_argument("ks_normal_check: zero variance");
  const double sd = std::sqrt(var);
  std::vector<double> z;
  z.reserve(raw.size());
  for (double x : raw) z.push_back((x - mean) / sd);
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n - f));
    ks = std::max(ks, std::fabs(f - static_cast<double>(i) / n));
  }
  return ks;
}

struct JointPoissonCheck {
  double tv = 0.0;
  double tv_bias_bound = 0.0;  // sqrt(#box cells / n) / 2, the plug-in bias scale
  std::vector<std::int64_t> box;
  std::vector<double> pair_correlations;  // row-major upper triangle (j < j')
};

// d_TV between the empirical joint law of the tuples and the product of
// Poissons, evaluated on a truncation box holding >= 1 - 1e-6 product mass
// (mass outside the box on either side is folded in).
inline JointPoissonCheck joint_product_poisson_check(
    const std::vector<std::vector<std::int64_t>>& tuples, const std::vector<double>& lambdas,
    std::vector<std::int64_t> box = {}) {
  const std::size_t r = lambdas.size();
  if (r < 2) throw std::invalid_argument("joint_product_poisson_check: need r >= 2");
  if (tuples.empty()) throw std::invalid_argument("joint_product_poisson_check: no samples");
  for (const auto& t : tuples)
    if (t.size() != r) throw std::invalid_argument("joint_product_poisson_check: tuple arity");

  const double want = 1.0 - 1e-6;
  if (box.empty()) {
    box.resize(r);
    for (std::size_t j = 0; j < r; ++j)
      box[j] = poisson_upper_quantile(lambdas[j], (1.0 - want) / static_cast<double>(r));
  }
  if (box.size() != r) throw std::invalid_argument("joint_product_poisson_check: box arity");
  // exact product mass of the box
  double box_mass = 1.0;
  std::vector<std::vector<double>> pmf(r);
  for (std::size_t j = 0; j < r; ++j) {
    double cum = 0.0;
    pmf[j].resize(static_cast<std::size_t>(box[j]) + 1);
    for (std::int64_t k = 0; k <= box[j]; ++k) {
      pmf[j][static_cast<std::size_t>(k)] = poisson_pmf(k, lambdas[j]);
      cum += pmf[j][static_cast<std::size_t>(k)];
    }
    box_mass *= cum;
  }
  if (box_mass < want)
    throw std::invalid_argument("joint_product_poisson_check: box too small for requested mass");

  const double n = static_cast<double>(tuples.size());
  std::map<std::vector<std::int64_t>, std::uint64_t> cells;
  double outside = 0.0;
  for (const auto& t : tuples) {
    bool in = true;
    for (std::size_t j = 0; j < r; ++j)
      if (t[j] < 0 || t[j] > box[j]) in = false;
    if (in)
      ++cells[t];
    else
      outside += 1.0;
  }
  outside /= n;
  double sum = 0.0, seen_product_mass = 0.0;
  for (const auto& [cell, count] : cells) {
    double pi = 1.0;
    for (std::size_t j = 0; j < r; ++j) pi *= pmf[j][static_cast<std::size_t>(cell[j])];
    seen_product_mass += pi;
    sum += std::fabs(static_cast<double>(count) / n - pi);
  }
  JointPoissonCheck out;
  out.box = box;
  out.tv = 0.5 * (sum + (box_mass - seen_product_mass) + outside + (1.0 - box_mass));
  double cells_total = 1.0;
  for (std::size_t j = 0; j < r; ++j) cells_total *= static_cast<double>(box[j] + 1);
  out.tv_bias_bound = 0.5 * std::sqrt(cells_total / n);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = a + 1; b < r; ++b) {
      double ma = 0.0, mb = 0.0;
      for (const auto& t : tuples) {
        ma += static_cast<double>(t[a]);
        mb += static_cast<double>(t[b]);
      }
      ma /= n;
      mb /= n;
      double cov = 0.0, va = 0.0, vb = 0.0;
      for (const auto& t : tuples) {
        const double da = static_cast<double>(t[a]) - ma;
        const double db = static_cast<double>(t[b]) - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
      }
      out.pair_correlations.push_back((va > 0 && vb > 0) ? cov / std::sqrt(va * vb) : 0.0);
    }
  return out;
}

struct LocalLimitResult {
  double max_rel_dev = 0.0;  // max over the window of |phat/poisson - 1|
  double mc_error = 0.0;     // worst relative MC standard error in the window
  int points = 0;
};

// Windowed local-limit comparison on [mu - c sqrt(mu), mu + c sqrt(mu)].
// Refuses when the window is too small or expected bin counts drop below 50.
inline LocalLimitResult local_limit_check(const std::vector<std::int64_t>& samples, double mu,
                                          double c) {
  if (samples.empty()) throw std::invalid_argument("local_limit_check: no samples");
  const double n = static_cast<double>(samples.size());
  const std::int64_t lo = static_cast<std::int64_t>(std::ceil(mu - c * std::sqrt(mu)));
  const std::int64_t hi = static_cast<std::int64_t>(std::floor(mu + c * std::sqrt(mu)));
  const std::int64_t points = hi - lo + 1;
  if (points < 20)
    throw std::invalid_argument("local_limit_check: window holds fewer than 20 lattice points");
  for (std::int64_t k = lo; k <= hi; ++k)
    if (n * poisson_pmf(k, mu) < 50.0)
      throw std::invalid_argument(
          "local_limit_check: under-sized sample (expected bin count below 50); "
          "increase trials");
  std::map<std::int64_t, std::uint64_t> counts;
  for (auto s : samples) ++counts[s];
  LocalLimitResult out;
  out.points = static_cast<int>(points);
  for (std::int64_t k = lo; k <= hi; ++k) {
    const double po = poisson_pmf(k, mu);
    auto it = counts.find(k);
    const double ph = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
    out.max_rel_dev = std::max(out.max_rel_dev, std::fabs(ph / po - 1.0));
    out.mc_error = std::max(out.mc_error, std::sqrt((1.0 - po) / (n * po)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// experiment runner

struct CheckToggles {
  bool poisson = false;
  bool normal = false;
  bool joint = false;
  bool local_limit = false;
  bool distance = false;
  bool clustering = false;
  bool goodness = false;
};

struct ExperimentConfig {
  std::vector<int> dims;  // one entry for a single-d run; several for a trend run
  std::string p_text;     // decimal literal, parsed exactly
  std::uint64_t trials = 1;
  std::uint64_t master_seed = 0;
  int workers = 1;
  int class_cap = 8;          // components up to this size are classified
  std::uint64_t store_cap = 64;  // fragment components stored explicitly up to this size
  int d_cap = 30;
  CheckToggles checks;
  double gamma = 3.0;
  double radius_frac = 0.05;
  double distance_margin = 0.03;

  // Worker count is an execution detail, not part of the experiment
  // identity; reports must be byte-identical for any parallelism level.
  ordered_json to_json() const {
    ordered_json j;
    j["d_list"] = dims;
    j["p"] = p_text;
    j["trials"] = trials;
    j["seed"] = master_seed;
    j["class_cap"] = class_cap;
    j["store_cap"] = store_cap;
    j["d_cap"] = d_cap;
    j["checks"] = ordered_json{{"poisson", checks.poisson},
                               {"normal", checks.normal},
                               {"joint", checks.joint},
                               {"local_limit", checks.local_limit},
                               {"distance", checks.distance},
                               {"clustering", checks.clustering},
                               {"goodness", checks.goodness}};
    j["gamma"] = gamma;
    j["radius_frac"] = radius_frac;
    j["distance_margin"] = distance_margin;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.dims = j.at("d_list").get<std::vector<int>>();
    c.p_text = j.at("p").get<std::string>();
    c.trials = j.at("trials").get<std::uint64_t>();
    c.master_seed = j.at("seed").get<std::uint64_t>();
    c.workers = j.value("workers", 1);
    c.class_cap = j.value("class_cap", 8);
    c.store_cap = j.value("store_cap", std::uint64_t{64});
    c.d_cap = j.value("d_cap", 30);
    if (j.contains("checks")) {
      const auto& t = j.at("checks");
      c.checks.poisson = t.value("poisson", false);
      c.checks.normal = t.value("normal", false);
      c.checks.joint = t.value("joint", false);
      c.checks.local_limit = t.value("local_limit", false);
      c.checks.distance = t.value("distance", false);
      c.checks.clustering = t.value("clustering", false);
      c.checks.goodness = t.value("goodness", false);
    }
    c.gamma = j.value("gamma", 3.0);
    c.radius_frac = j.value("radius_frac", 0.05);
    c.distance_margin = j.value("distance_margin", 0.03);
    return c;
  }
};

namespace detail {

struct TrialData {
  std::uint64_t x = 0, z = 0, l1 = 0, l2 = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> hist;           // size -> count
  std::vector<std::pair<std::string, std::uint64_t>> classes;          // form id -> count
  std::uint64_t unclassified = 0;
  bool has_distance = false;
  int max_dist = -1;
  double frac_within = 0.0;
  bool has_goodness = false;
  std::uint64_t bad_count = 0;
  bool good_all = false;
  bool l2_le_n = false;
  bool has_cluster = false;
  std::uint64_t clus1 = 0, clus2 = 0;
  ordered_json census_json;
};

template <typename Fn>
inline void parallel_trials(std::uint64_t trials, int workers, Fn&& fn) {
  if (workers <= 1) {
    for (std::uint64_t i = 0; i < trials; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::vector<std::thread> pool;
  const int nw = std::min<int>(workers, 64);
  pool.reserve(static_cast<std::size_t>(nw));
  for (int w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::uint64_t i = next.fetch_add(1);
        if (i >= trials) break;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

inline std::uint64_t hist_count(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& hist,
                                std::uint64_t size) {
  for (const auto& [s, c] : hist)
    if (s == size) return c;
  return 0;
}

inline std::uint64_t class_count(const std::vector<std::pair<std::string, std::uint64_t>>& cls,
                                 const std::string& id) {
  for (const auto& [s, c] : cls)
    if (s == id) return c;
  return 0;
}

struct Moments {
  double mean = 0.0, var = 0.0, stderr_ = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  long double sum = 0.0L;
  for (double x : xs) sum += x;
  m.mean = static_cast<double>(sum / xs.size());
  if (xs.size() > 1) {
    long double acc = 0.0L;
    for (double x : xs) acc += (x - m.mean) * (x - m.mean);
    m.var = static_cast<double>(acc / (xs.size() - 1));
  }
  m.stderr_ = std::sqrt(m.var / static_cast<double>(xs.size()));
  return m;
}

inline TrialData run_one_trial(const ExperimentConfig& cfg, const DecimalProb& p, int d,
                               std::uint64_t trial) {
  SampleSpec spec(d, threshold_from_p(p), cfg.master_seed, trial);
  ComponentCensus census = component_census(spec, cfg.store_cap, cfg.d_cap);
  TrialData out;
  out.x = census.x_total;
  out.z = census.z;
  out.l1 = census.l1;
  out.l2 = census.l2;
  for (const auto& [size, count] : census.size_histogram) out.hist.emplace_back(size, count);
  FragmentClassification cls = classify_fragment(census);
  out.unclassified = cls.oversize;
  for (const auto& [form, count] : cls.counts) {
    if (form.size() <= static_cast<std::size_t>(cfg.class_cap))
      out.classes.emplace_back(form.id(), count);
    else
      out.unclassified += count;
  }
  out.census_json = census_to_json(census, cfg.p_text);

  const double pval = p.value();
  if (cfg.checks.distance) {
    out.has_distance = true;
    DistanceProfile prof = fragment_distance_profile(census, spec);
    if (!prof.fragment_empty) {
      out.max_dist = prof.max_distance;
      if (pval < 0.5) {  // eta* only exists in the theory regime
        const double eta = eta_star(pval, 1e-12);
        const int rad = static_cast<int>(std::floor((eta - cfg.distance_margin) * d));
        std::uint64_t within = 0;
        for (int r = 0; r <= rad && r < static_cast<int>(prof.counts.size()); ++r)
          within += prof.counts[static_cast<std::size_t>(r)];
        // keep exactly the serialized value so analyze re-aggregates identically
        out.frac_within = round12(static_cast<double>(within) /
                                  static_cast<double>(std::uint64_t{1} << d));
      }
    }
    out.census_json["max_fragment_distance"] = out.max_dist;
    out.census_json["frac_within_eta_margin"] = out.frac_within;
  }
  if (cfg.checks.goodness) {
    out.has_goodness = true;
    GoodnessReport g = goodness_diagnostic(census, spec, pval, cfg.gamma);
    out.bad_count = g.bad_vertex_count;
    out.good_all = g.good_all_in_giant;
    out.l2_le_n = g.l2_within_n_gamma;
    out.census_json["bad_vertices"] = out.bad_count;
    out.census_json["good_all_in_giant"] = out.good_all;
    out.census_json["l2_le_ngamma"] = out.l2_le_n;
  }
  if (cfg.checks.clustering) {
    out.has_cluster = true;
    const int rad = static_cast<int>(std::floor(cfg.radius_frac * d));
    BallClusterStats bc = ball_cluster_statistic(census, rad);
    out.clus1 = bc.max_in_ball_at_fragment_vertex;
    out.clus2 = bc.max_within_double_radius;
    out.census_json["cluster_stat1"] = out.clus1;
    out.census_json["cluster_stat2"] = out.clus2;
  }
  return out;
}

// size t of the form named by a census class id ("Q<s>/v<ids>/e<pairs>")
inline std::size_t form_id_size(const std::string& id) {
  const std::size_t v = id.find("/v");
  const std::size_t e = id.find("/e");
  if (v == std::string::npos || e == std::string::npos || e <= v + 2) return 0;
  std::size_t count = 1;
  for (std::size_t i = v + 2; i < e; ++i)
    if (id[i] == ',') ++count;
  return count;
}

inline TrialData trial_from_census_json(const nlohmann::json& c, int class_cap) {
  TrialData out;
  out.x = c.at("X").get<std::uint64_t>();
  out.z = c.at("Z").get<std::uint64_t>();
  out.l1 = c.at("L1").get<std::uint64_t>();
  out.l2 = c.at("L2").get<std::uint64_t>();
  for (const auto& [key, val] : c.at("sizes_histogram").items())
    out.hist.emplace_back(std::strtoull(key.c_str(), nullptr, 10), val.get<std::uint64_t>());
  std::sort(out.hist.begin(), out.hist.end());
  out.unclassified = c.at("oversize").get<std::uint64_t>();
  for (const auto& rec : c.at("classes")) {
    const std::string id = rec.at("form_id").get<std::string>();
    const std::uint64_t count = rec.at("count").get<std::uint64_t>();
    if (form_id_size(id) <= static_cast<std::size_t>(class_cap))
      out.classes.emplace_back(id, count);
    else
      out.unclassified += count;
  }
  if (c.contains("max_fragment_distance")) {
    out.has_distance = true;
    out.max_dist = c.at("max_fragment_distance").get<int>();
    out.frac_within = c.at("frac_within_eta_margin").get<double>();
  }
  if (c.contains("bad_vertices")) {
    out.has_goodness = true;
    out.bad_count = c.at("bad_vertices").get<std::uint64_t>();
    out.good_all = c.at("good_all_in_giant").get<bool>();
    out.l2_le_n = c.at("l2_le_ngamma").get<bool>();
  }
  if (c.contains("cluster_stat1")) {
    out.has_cluster = true;
    out.clus1 = c.at("cluster_stat1").get<std::uint64_t>();
    out.clus2 = c.at("cluster_stat2").get<std::uint64_t>();
  }
  out.census_json = ordered_json::parse(c.dump());
  return out;
}

// Aggregates one dimension's trials into the theory/empirical/checks/stats
// blocks. Shared verbatim between simulate and analyze so a round trip
// reproduces derived statistics exactly.
inline ordered_json build_result_block(const ExperimentConfig& cfg, int d,
                                       const std::vector<TrialData>& trials) {
  const DecimalProb p = DecimalProb::parse(cfg.p_text);
  const double pval = p.value();
  const std::uint64_t n = trials.size();
  const bool theory_ok = 2 * p.numerator < p.pow10();

  ordered_json block;
  block["d"] = d;
  block["p"] = cfg.p_text;
  block["trials"] = n;

  struct Row {
    std::string id;
    double value;
    std::optional<double> se;
    std::optional<double> theory;
  };
  std::vector<Row> rows;
  auto add_row = [&](const std::string& id, double value, std::optional<double> se = {},
                     std::optional<double> theory = {}) {
    rows.push_back({id, round12(value), se ? std::optional<double>(round12(*se)) : se,
                    theory ? std::optional<double>(round12(*theory)) : theory});
  };

  // theory
  int mp = 0;
  double mu1 = 0.0, mu2 = 0.0, mu3 = 0.0;
  std::vector<ClassExpectation> theory_classes;
  if (theory_ok) {
    ordered_json theory;
    mp = m_p(p);
    theory["m_p"] = mp;
    theory["eta_star"] = round12(eta_star(pval, 1e-12));
    mu1 = mu_exact(1, d, pval);
    mu2 = mu_exact(2, d, pval);
    mu3 = mu_exact(3, d, pval);
    theory["mu1"] = round12(mu1);
    theory["mu2"] = round12(mu2);
    theory["mu3"] = round12(mu3);
    theory["mu3_coeff2_variant"] = round12(mu_exact(3, d, pval, true));
    ordered_json cls = ordered_json::array();
    for (int t = 1; t <= std::min(3, cfg.class_cap); ++t)
      for (const auto& f : enumerate_classes(t)) {
        ClassExpectation ce = class_expectation(f, d, pval);
        theory_classes.push_back(ce);
        ordered_json rec;
        rec["form_id"] = f.id();
        rec["form"] = to_json(f);
        rec["beta"] = round12(ce.beta);
        rec["expected_count"] = round12(ce.expected_count);
        cls.push_back(std::move(rec));
      }
    theory["classes"] = std::move(cls);
    block["theory"] = std::move(theory);
  } else {
    block["theory"] = nullptr;
  }

  // empirical aggregates
  std::vector<double> xs, zs, l1s, l2s, x1s, x2s, x3s;
  xs.reserve(n);
  zs.reserve(n);
  for (const auto& t : trials) {
    xs.push_back(static_cast<double>(t.x));
    zs.push_back(static_cast<double>(t.z));
    l1s.push_back(static_cast<double>(t.l1));
    l2s.push_back(static_cast<double>(t.l2));
    x1s.push_back(static_cast<double>(hist_count(t.hist, 1)));
    x2s.push_back(static_cast<double>(hist_count(t.hist, 2)));
    x3s.push_back(static_cast<double>(hist_count(t.hist, 3)));
  }
  const auto mx = moments(xs), mz = moments(zs), ml1 = moments(l1s), ml2 = moments(l2s);
  const auto mx1 = moments(x1s), mx2 = moments(x2s), mx3 = moments(x3s);

  ordered_json empirical;
  auto put_moment = [&](const char* key, const Moments& m) {
    ordered_json rec;
    rec["mean"] = round12(m.mean);
    rec["var"] = round12(m.var);
    rec["stderr"] = round12(m.stderr_);
    rec["n"] = n;
    empirical[key] = std::move(rec);
  };
  put_moment("X", mx);
  put_moment("Z", mz);
  put_moment("L1", ml1);
  put_moment("L2", ml2);
  put_moment("X1", mx1);
  put_moment("X2", mx2);
  put_moment("X3", mx3);

  std::map<std::uint64_t, std::uint64_t> size_totals;
  for (const auto& t : trials)
    for (const auto& [size, count] : t.hist) size_totals[size] += count;
  ordered_json xtm = ordered_json::object();
  for (const auto& [size, total] : size_totals)
    xtm[std::to_string(size)] = round12(static_cast<double>(total) / static_cast<double>(n));
  empirical["X_t_means"] = std::move(xtm);

  std::map<std::uint64_t, std::uint64_t> l2_hist;
  for (const auto& t : trials) ++l2_hist[t.l2];
  ordered_json l2h = ordered_json::object();
  for (const auto& [v, c] : l2_hist) l2h[std::to_string(v)] = c;
  empirical["L2_histogram"] = std::move(l2h);

  std::map<std::string, std::uint64_t> class_totals;
  std::uint64_t unclassified_total = 0;
  for (const auto& t : trials) {
    unclassified_total += t.unclassified;
    for (const auto& [id, count] : t.classes) class_totals[id] += count;
  }
  ordered_json cm = ordered_json::object();
  for (const auto& [id, total] : class_totals)
    cm[id] = round12(static_cast<double>(total) / static_cast<double>(n));
  empirical["class_mean_counts"] = std::move(cm);
  empirical["unclassified_mean"] =
      round12(static_cast<double>(unclassified_total) / static_cast<double>(n));

  add_row("mean_X", mx.mean, mx.stderr_);
  add_row("var_X", mx.var);
  add_row("mean_Z", mz.mean, mz.stderr_);
  add_row("var_Z", mz.var);
  add_row("mean_L1", ml1.mean, ml1.stderr_);
  add_row("mean_L2", ml2.mean, ml2.stderr_);
  if (theory_ok) {
    std::uint64_t eq = 0;
    for (const auto& t : trials)
      if (t.l2 == static_cast<std::uint64_t>(mp)) ++eq;
    const double f = static_cast<double>(eq) / static_cast<double>(n);
    const double se = std::sqrt(f * (1.0 - f) / static_cast<double>(n));
    empirical["frac_L2_eq_mp"] = round12(f);
    add_row("frac_L2_eq_mp", f, se);
    add_row("mean_X1", mx1.mean, mx1.stderr_, mu1);
    add_row("var_X1", mx1.var, {}, mu1);
    add_row("mean_X2", mx2.mean, mx2.stderr_, mu2);
    add_row("mean_X3", mx3.mean, mx3.stderr_, mu3);
    for (const auto& ce : theory_classes) {
      std::uint64_t total = class_totals.count(ce.form.id()) ? class_totals[ce.form.id()] : 0;
      add_row("mean_Y." + ce.form.id(),
              static_cast<double>(total) / static_cast<double>(n), {}, ce.expected_count);
    }
  } else {
    add_row("mean_X1", mx1.mean, mx1.stderr_);
    add_row("var_X1", mx1.var);
    add_row("mean_X2", mx2.mean, mx2.stderr_);
    add_row("mean_X3", mx3.mean, mx3.stderr_);
  }
  block["empirical"] = std::move(empirical);

  // checks
  ordered_json checks = ordered_json::object();
  auto x1_samples = [&] {
    std::vector<std::int64_t> v;
    v.reserve(n);
    for (const auto& t : trials)
      v.push_back(static_cast<std::int64_t>(hist_count(t.hist, 1)));
    return v;
  };
  if (cfg.checks.poisson) {
    ordered_json rec;
    if (theory_ok && mu1 > 0.0) {
      const double tv1 = empirical_tv_to_poisson(x1_samples(), mu1);
      rec["tv_X1_po_mu1"] = round12(tv1);
      add_row("tv_X1_po_mu1", tv1);
    }
    std::vector<std::int64_t> xv, zv;
    for (const auto& t : trials) {
      xv.push_back(static_cast<std::int64_t>(t.x));
      zv.push_back(static_cast<std::int64_t>(t.z));
    }
    if (mx.mean > 0.0) {
      const double tvx = empirical_tv_to_poisson(xv, mx.mean);
      rec["tv_X_po_mean"] = round12(tvx);
      add_row("tv_X_po_mean", tvx);
    }
    if (mz.mean > 0.0) {
      const double tvz = empirical_tv_to_poisson(zv, mz.mean);
      rec["tv_Z_po_mean"] = round12(tvz);
      add_row("tv_Z_po_mean", tvz);
    }
    std::map<std::int64_t, bool> support;
    for (auto v : x1_samples()) support[v] = true;
    rec["plug_in_bias_bound"] =
        round12(0.5 * std::sqrt(static_cast<double>(support.size()) / static_cast<double>(n)));
    checks["poisson"] = std::move(rec);
  }
  if (cfg.checks.normal) {
    ordered_json rec;
    try {
      std::vector<double> raw;
      for (const auto& t : trials) raw.push_back(static_cast<double>(hist_count(t.hist, 1)));
      const double ks = ks_normal_check(raw);
      rec["ks_X1"] = round12(ks);
      add_row("ks_X1", ks);
      const double ksx = ks_normal_check(xs);
      rec["ks_X"] = round12(ksx);
      add_row("ks_X", ksx);
    } catch (const std::exception& e) {
      rec["skipped"] = e.what();
    }
    checks["normal"] = std::move(rec);
  }
  if (cfg.checks.joint) {
    ordered_json rec;
    if (!theory_ok) {
      rec["skipped"] = "theory requires p < 1/2";
    } else {
      const std::string vid = enumerate_classes(1)[0].id();
      const std::string eid = enumerate_classes(2)[0].id();
      double lam_v = 0.0, lam_e = 0.0;
      for (const auto& ce : theory_classes) {
        if (ce.form.id() == vid) lam_v = ce.expected_count;
        if (ce.form.id() == eid) lam_e = ce.expected_count;
      }
      std::vector<std::vector<std::int64_t>> tuples;
      tuples.reserve(n);
      for (const auto& t : trials)
        tuples.push_back({static_cast<std::int64_t>(class_count(t.classes, vid)),
                          static_cast<std::int64_t>(class_count(t.classes, eid))});
      try {
        JointPoissonCheck jc = joint_product_poisson_check(tuples, {lam_v, lam_e});
        rec["forms"] = {vid, eid};
        rec["lambda"] = {round12(lam_v), round12(lam_e)};
        rec["tv"] = round12(jc.tv);
        rec["tv_bias_bound"] = round12(jc.tv_bias_bound);
        rec["corr"] = round12(jc.pair_correlations[0]);
        add_row("joint_tv_vertex_edge", jc.tv);
        add_row("joint_corr_vertex_edge", jc.pair_correlations[0]);
      } catch (const std::exception& e) {
        rec["skipped"] = e.what();
      }
    }
    checks["joint"] = std::move(rec);
  }
  if (cfg.checks.local_limit) {
    ordered_json rec;
    if (!theory_ok) {
      rec["skipped"] = "theory requires p < 1/2";
    } else {
      try {
        LocalLimitResult ll = local_limit_check(x1_samples(), mu1, 1.0);
        rec["mu"] = round12(mu1);
        rec["c"] = 1.0;
        rec["max_rel_dev"] = round12(ll.max_rel_dev);
        rec["mc_error"] = round12(ll.mc_error);
        rec["points"] = ll.points;
        add_row("local_limit_max_dev_X1", ll.max_rel_dev);
      } catch (const std::exception& e) {
        rec["refused"] = e.what();
      }
    }
    checks["local_limit"] = std::move(rec);
  }
  if (cfg.checks.distance) {
    ordered_json rec;
    std::vector<double> fracs;
    int max_over = -1;
    for (const auto& t : trials) {
      fracs.push_back(t.frac_within);
      max_over = std::max(max_over, t.max_dist);
    }
    const auto mf = moments(fracs);
    rec["margin"] = cfg.distance_margin;
    rec["frac_within_mean"] = round12(mf.mean);
    rec["frac_within_stderr"] = round12(mf.stderr_);
    rec["max_distance"] = max_over;
    checks["distance"] = std::move(rec);
    add_row("dist_frac_within_mean", mf.mean, mf.stderr_);
    add_row("dist_max_distance", static_cast<double>(max_over));
  }
  if (cfg.checks.clustering) {
    ordered_json rec;
    rec["radius"] = static_cast<int>(std::floor(cfg.radius_frac * d));
    std::vector<double> s1;
    std::uint64_t le_mp = 0, max2 = 0;
    for (const auto& t : trials) {
      s1.push_back(static_cast<double>(t.clus1));
      max2 = std::max(max2, t.clus2);
      if (theory_ok && t.clus1 <= static_cast<std::uint64_t>(mp)) ++le_mp;
    }
    const auto m1 = moments(s1);
    rec["mean_stat1"] = round12(m1.mean);
    rec["max_stat2"] = max2;
    if (theory_ok) {
      const double f = static_cast<double>(le_mp) / static_cast<double>(n);
      rec["frac_stat1_le_mp"] = round12(f);
      add_row("clus_frac_le_mp", f);
    }
    add_row("clus_mean_stat1", m1.mean, m1.stderr_);
    checks["clustering"] = std::move(rec);
  }
  if (cfg.checks.goodness) {
    ordered_json rec;
    std::uint64_t flags = 0, l2ok = 0, l2max = 0;
    long double badsum = 0.0L;
    for (const auto& t : trials) {
      if (t.good_all) ++flags;
      if (t.l2_le_n) ++l2ok;
      l2max = std::max(l2max, t.l2);
      badsum += static_cast<long double>(t.bad_count);
    }
    const double flag_frac = static_cast<double>(flags) / static_cast<double>(n);
    rec["gamma"] = cfg.gamma;
    rec["n_gamma"] = static_cast<std::uint64_t>(std::floor(16.0 * (1.0 + cfg.gamma) / pval));
    rec["flag_fraction"] = round12(flag_frac);
    rec["all_trials_flag"] = flags == n;
    rec["l2_le_ngamma_all"] = l2ok == n;
    rec["l2_max"] = l2max;
    rec["mean_bad_vertices"] = round12(static_cast<double>(badsum / n));
    checks["goodness"] = std::move(rec);
    add_row("goodness_flag_frac", flag_frac,
            std::sqrt(flag_frac * (1.0 - flag_frac) / static_cast<double>(n)));
    add_row("goodness_all_true", flags == n ? 1.0 : 0.0);
    add_row("l2_le_ngamma_all", l2ok == n ? 1.0 : 0.0);
    add_row("l2_max", static_cast<double>(l2max));
  }
  block["checks"] = std::move(checks);

  ordered_json stats = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json rec;
    rec["id"] = row.id;
    rec["value"] = row.value;
    if (row.se) rec["stderr"] = *row.se;
    if (row.theory) rec["theory"] = *row.theory;
    stats.push_back(std::move(rec));
  }
  block["stats"] = std::move(stats);
  return block;
}

}  // namespace detail

inline constexpr const char* kToolVersion = "1.0.0";

struct SummaryReport {
  ordered_json doc;

  std::string json_text() const { return doc.dump(1) + "\n"; }

  // One row per statistic; the fixed column set of the CSV contract.
  std::string csv_text() const {
    std::string out = "statistic,d,p,trials,value,stderr,theory\n";
    for (const auto& res : doc.at("results")) {
      const std::string d = std::to_string(res.at("d").get<int>());
      const std::string p = res.at("p").get<std::string>();
      const std::string tr = std::to_string(res.at("trials").get<std::uint64_t>());
      for (const auto& row : res.at("stats")) {
        out += row.at("id").get<std::string>() + "," + d + "," + p + "," + tr + ",";
        out += fmt12(row.at("value").get<double>());
        out += ",";
        if (row.contains("stderr")) out += fmt12(row.at("stderr").get<double>());
        out += ",";
        if (row.contains("theory")) out += fmt12(row.at("theory").get<double>());
        out += "\n";
      }
    }
    return out;
  }
};

// Runs `trials` censuses per dimension with per-trial sub-seeds and aggregates
// everything enabled in the config. Output is a pure function of the config:
// trials land in preallocated slots, aggregation runs in trial order, so any
// worker count yields byte-identical reports.
inline SummaryReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_experiment: trials must be >= 1");
  if (cfg.workers < 1) throw std::invalid_argument("run_experiment: workers must be >= 1");
  if (cfg.dims.empty()) throw std::invalid_argument("run_experiment: no dimensions");
  const DecimalProb p = DecimalProb::parse(cfg.p_text);
  for (int d : cfg.dims)
    if (d < 2 || d > cfg.d_cap)
      throw std::invalid_argument("run_experiment: dimension outside [2, d_cap]");

  SummaryReport report;
  report.doc["tool"] = "qpcube";
  report.doc["version"] = kToolVersion;
  report.doc["config"] = cfg.to_json();
  ordered_json results = ordered_json::array();
  for (int d : cfg.dims) {
    std::vector<detail::TrialData> slots(cfg.trials);
    detail::parallel_trials(cfg.trials, cfg.workers, [&](std::uint64_t i) {
      slots[i] = detail::run_one_trial(cfg, p, d, i);
    });
    ordered_json block = detail::build_result_block(cfg, d, slots);
    ordered_json censuses = ordered_json::array();
    for (auto& t : slots) censuses.push_back(std::move(t.census_json));
    block["censuses"] = std::move(censuses);
    results.push_back(std::move(block));
  }
  report.doc["results"] = std::move(results);
  return report;
}

struct AnalyzeResult {
  ordered_json derived;  // recomputed result blocks (without censuses)
  bool matches = true;   // recomputation agrees with the stored report
};

// Recomputes every derived block from the stored censuses and compares with
// what the report claims.
inline AnalyzeResult analyze_report(const nlohmann::json& report) {
  AnalyzeResult out;
  ExperimentConfig cfg = ExperimentConfig::from_json(report.at("config"));
  ordered_json results = ordered_json::array();
  for (const auto& res : report.at("results")) {
    const int d = res.at("d").get<int>();
    std::vector<detail::TrialData> trials;
    for (const auto& c : res.at("censuses"))
      trials.push_back(detail::trial_from_census_json(c, cfg.class_cap));
    ordered_json block = detail::build_result_block(cfg, d, trials);
    for (const char* key : {"theory", "empirical", "checks", "stats"}) {
      // structural comparison: the stored report may have been re-parsed with
      // a different key order
      if (!res.contains(key) ||
          nlohmann::json(res.at(key)) != nlohmann::json::parse(block.at(key).dump()))
        out.matches = false;
    }
    results.push_back(std::move(block));
  }
  out.derived["tool"] = "qpcube";
  out.derived["version"] = kToolVersion;
  out.derived["config"] = cfg.to_json();
  out.derived["results"] = std::move(results);
  return out;
}

struct EnvelopeVerdict {
  std::string key;
  double value = 0.0;
  double lo = 0.0, hi = 0.0;
  bool applicable = false;  // some result block matches the .d<d>.p<p> suffix
  bool found = false;
  bool ok = false;
};

// Envelope files map "<statistic>.d<d>.p<p>" to [lo, hi]. Entries whose
// dimension/probability suffix matches no result block are reported as not
// applicable; applicable entries must name an existing statistic and the
// value must fall inside the range.
inline std::vector<EnvelopeVerdict> check_envelope(const nlohmann::json& report,
                                                   const nlohmann::json& envelope) {
  std::vector<EnvelopeVerdict> verdicts;
  for (const auto& [key, range] : envelope.items()) {
    EnvelopeVerdict v;
    v.key = key;
    v.lo = range.at(0).get<double>();
    v.hi = range.at(1).get<double>();
    for (const auto& res : report.at("results")) {
      const std::string suffix =
          ".d" + std::to_string(res.at("d").get<int>()) + ".p" + res.at("p").get<std::string>();
      if (key.size() <= suffix.size() ||
          key.compare(key.size() - suffix.size(), suffix.size(), suffix) != 0)
        continue;
      v.applicable = true;
      const std::string stat = key.substr(0, key.size() - suffix.size());
      for (const auto& row : res.at("stats")) {
        if (row.at("id").get<std::string>() != stat) continue;
        v.found = true;
        v.value = row.at("value").get<double>();
        v.ok = v.value >= v.lo && v.value <= v.hi;
      }
    }
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

}  // namespace qpcube
