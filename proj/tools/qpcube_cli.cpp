// Command-line front end: calculators, class enumeration, the exact small-d
// oracle, the Monte Carlo simulator, and re-analysis of stored reports.

#include <chrono>
#include <clocale>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qpcube/enumerate.hpp"
#include "qpcube/expectations.hpp"
#include "qpcube/oracle.hpp"
#include "qpcube/sampler.hpp"
#include "qpcube/stats.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output path: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input path: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> parse_sizes(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

int cmd_calc(int d, const std::string& p_text, const std::string& classes_csv,
             double eta_tol) {
  qpcube::Params params(d, p_text);
  const double p = params.p;
  std::printf("d = %d\n", d);
  std::printf("p = %s\n", params.decimal->text.c_str());
  std::printf("q = %s\n", qpcube::fmt12(params.q).c_str());
  std::printf("m_p = %d\n", qpcube::m_p(params));
  std::printf("eta_star = %s\n", qpcube::fmt12(qpcube::eta_star(p, eta_tol)).c_str());
  std::printf("mu1 = %s\n", qpcube::fmt12(qpcube::mu_exact(1, d, p)).c_str());
  std::printf("mu2 = %s\n", qpcube::fmt12(qpcube::mu_exact(2, d, p)).c_str());
  std::printf("mu3 = %s\n", qpcube::fmt12(qpcube::mu_exact(3, d, p)).c_str());
  std::printf("mu3_coeff2_variant = %s\n",
              qpcube::fmt12(qpcube::mu_exact(3, d, p, true)).c_str());
  for (int t = 1; t <= 3; ++t) {
    auto asym = qpcube::mu_asymptotic(t, d, p);
    std::printf("mu%d_asymptotic = %s%s\n", t, qpcube::fmt12(asym.value).c_str(),
                asym.beyond_mp ? "  (t > m_p)" : "");
  }
  if (!classes_csv.empty()) {
    std::vector<qpcube::CanonicalForm> all;
    for (int t : parse_sizes(classes_csv)) {
      for (const auto& f : qpcube::enumerate_classes(t)) {
        auto ce = qpcube::class_expectation(f, d, p);
        std::printf("class %s  e=%llu e'=%llu s=%d  beta = %s  E[Y] = %s\n",
                    f.id().c_str(), static_cast<unsigned long long>(ce.e),
                    static_cast<unsigned long long>(ce.e_prime), ce.s,
                    qpcube::fmt12(ce.beta).c_str(),
                    qpcube::fmt12(ce.expected_count).c_str());
        all.push_back(f);
      }
    }
    auto cc = qpcube::class_constant(all, p);
    std::printf("class_constant: t = %d, s = %d, |I*| = %zu, c = %s%s\n", cc.t, cc.s,
                cc.istar.size(), qpcube::fmt12(cc.c).c_str(),
                cc.size_warning ? "  (warning: a form exceeds m_p)" : "");
  }
  return kExitOk;
}

int cmd_enumerate(int t, int d, int cap) {
  auto forms = qpcube::enumerate_classes(t, cap);
  std::printf("t = %d\n", t);
  std::printf("classes_total = %zu\n", forms.size());
  std::size_t spreading = 0;
  for (const auto& f : forms)
    if (qpcube::is_spreading_tree(f)) ++spreading;
  std::printf("spreading_tree_classes = %zu\n", spreading);
  auto counts = qpcube::count_spreading_trees(t, std::max(d, t - 1));
  std::printf("spreading_tree_classes_formula = %s\n", counts.classes.to_string().c_str());
  for (const auto& f : forms) {
    std::string line = "form " + f.id();
    line += qpcube::is_spreading_tree(f) ? "  spreading=1" : "  spreading=0";
    if (d >= f.span) {
      line += "  embeddings_in_Q" + std::to_string(d) + " = " +
              qpcube::count_embeddings(f, d).to_string();
    }
    std::printf("%s\n", line.c_str());
  }
  if (d >= t - 1) {
    auto c2 = qpcube::count_spreading_trees(t, d);
    std::printf("spreading_tree_subgraphs_in_Q%d = %s\n", d, c2.subgraphs.to_string().c_str());
  }
  return kExitOk;
}

int cmd_oracle(int d, const std::string& p_text, const std::string& out_path) {
  qpcube::DecimalProb p = qpcube::DecimalProb::parse(p_text);
  const double pv = p.value();
  nlohmann::ordered_json j;
  j["d"] = d;
  j["p"] = p.text;
  auto joint = qpcube::oracle_size_vector_law(d, pv);
  nlohmann::ordered_json jl = nlohmann::ordered_json::array();
  for (const auto& [key, prob] : joint) {
    nlohmann::ordered_json rec;
    rec["x"] = key;
    rec["prob"] = qpcube::round12(prob);
    jl.push_back(std::move(rec));
  }
  j["joint_size_counts"] = std::move(jl);
  auto law_block = [&](const qpcube::ExactLaw& law) {
    nlohmann::ordered_json b = nlohmann::ordered_json::object();
    for (const auto& [k, v] : law.pmf) b[std::to_string(k)] = qpcube::round12(v);
    return b;
  };
  j["X"] = law_block(qpcube::oracle_law_X(d, pv));
  j["Z"] = law_block(qpcube::oracle_law_Z(d, pv));
  j["L2"] = law_block(qpcube::oracle_law_L2(d, pv));
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& [form, mean] : qpcube::oracle_class_means(d, pv)) {
    nlohmann::ordered_json rec;
    rec["form_id"] = form.id();
    rec["form"] = qpcube::to_json(form);
    rec["mean"] = qpcube::round12(mean);
    if (d >= form.span)
      rec["expected"] = qpcube::round12(qpcube::expected_class_count(form, d, pv));
    classes.push_back(std::move(rec));
  }
  j["class_means"] = std::move(classes);
  const std::string text = j.dump(1) + "\n";
  if (out_path.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_file(out_path, text);
  return kExitOk;
}

qpcube::ExperimentConfig config_from_cli(const nlohmann::json* file_cfg, int d,
                                         const std::string& d_list_csv,
                                         const std::string& p_text, std::uint64_t trials,
                                         bool trials_set, std::uint64_t seed, bool seed_set,
                                         int workers, int class_cap, std::uint64_t store_cap,
                                         int d_cap, const std::string& checks_csv, double gamma,
                                         double radius_frac, double distance_margin) {
  qpcube::ExperimentConfig cfg;
  if (file_cfg) cfg = qpcube::ExperimentConfig::from_json(*file_cfg);
  bool have_seed = file_cfg && file_cfg->contains("seed");
  if (!d_list_csv.empty()) {
    cfg.dims.clear();
    for (int dd : parse_sizes(d_list_csv)) cfg.dims.push_back(dd);
  } else if (d > 0) {
    cfg.dims = {d};
  }
  if (!p_text.empty()) cfg.p_text = p_text;
  if (trials_set) cfg.trials = trials;
  if (seed_set) {
    cfg.master_seed = seed;
    have_seed = true;
  }
  if (workers > 0) cfg.workers = workers;
  if (class_cap > 0) cfg.class_cap = class_cap;
  if (store_cap > 0) cfg.store_cap = store_cap;
  if (d_cap > 0) cfg.d_cap = d_cap;
  if (!checks_csv.empty()) {
    std::stringstream ss(checks_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item == "poisson") cfg.checks.poisson = true;
      else if (item == "normal") cfg.checks.normal = true;
      else if (item == "joint") cfg.checks.joint = true;
      else if (item == "local-limit") cfg.checks.local_limit = true;
      else if (item == "distance") cfg.checks.distance = true;
      else if (item == "clustering") cfg.checks.clustering = true;
      else if (item == "goodness") cfg.checks.goodness = true;
      else if (item == "all") {
        cfg.checks = {true, true, true, true, true, true, true};
      } else {
        throw UsageError("--checks: unknown check name '" + item + "'");
      }
    }
  }
  if (gamma > 0) cfg.gamma = gamma;
  if (radius_frac > 0) cfg.radius_frac = radius_frac;
  if (distance_margin > 0) cfg.distance_margin = distance_margin;

  if (cfg.dims.empty()) throw UsageError("--d or --d-list is required");
  if (cfg.p_text.empty()) throw UsageError("--p is required");
  if (cfg.trials < 1) throw UsageError("--trials must be >= 1");
  if (!have_seed) throw UsageError("--seed is required (no ambient entropy)");
  return cfg;
}

int cmd_simulate(const qpcube::ExperimentConfig& cfg, const std::string& out_path,
                 const std::string& csv_path) {
  const auto t0 = std::chrono::steady_clock::now();
  qpcube::SummaryReport report = qpcube::run_experiment(cfg);
  const auto t1 = std::chrono::steady_clock::now();
  std::fprintf(stderr, "simulate: %.2fs\n",
               std::chrono::duration<double>(t1 - t0).count());
  if (out_path.empty())
    std::fputs(report.json_text().c_str(), stdout);
  else
    write_file(out_path, report.json_text());
  if (!csv_path.empty()) write_file(csv_path, report.csv_text());
  return kExitOk;
}

int cmd_analyze(const std::string& in_path, const std::string& out_path,
                const std::string& envelope_path, const std::string& csv_path) {
  nlohmann::json report = nlohmann::json::parse(read_file(in_path));
  qpcube::AnalyzeResult res = qpcube::analyze_report(report);
  std::printf("derived_match = %s\n", res.matches ? "true" : "false");
  if (!out_path.empty()) write_file(out_path, res.derived.dump(1) + "\n");
  if (!csv_path.empty()) {
    qpcube::SummaryReport rep;
    rep.doc = res.derived;
    write_file(csv_path, rep.csv_text());
  }
  bool env_ok = true;
  if (!envelope_path.empty()) {
    nlohmann::json envelope = nlohmann::json::parse(read_file(envelope_path));
    for (const auto& v : qpcube::check_envelope(res.derived, envelope)) {
      if (!v.applicable) {
        std::printf("envelope %s: skipped (no matching run)\n", v.key.c_str());
        continue;
      }
      std::printf("envelope %s: value=%s range=[%s, %s] -> %s\n", v.key.c_str(),
                  v.found ? qpcube::fmt12(v.value).c_str() : "missing",
                  qpcube::fmt12(v.lo).c_str(), qpcube::fmt12(v.hi).c_str(),
                  v.found && v.ok ? "ok" : "FAIL");
      if (!v.found || !v.ok) env_ok = false;
    }
  }
  if (!res.matches) {
    std::fprintf(stderr, "analyze: stored derived statistics do not match recomputation\n");
    return kExitRuntime;
  }
  return env_ok ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_ALL, "C");
  CLI::App app{"hypercube bond-percolation toolkit: exact component-count theory, "
               "canonical cube-subgraph classes, and a deterministic Monte Carlo census"};
  app.require_subcommand(1);

  // calc
  auto* calc = app.add_subcommand("calc", "print scalar theory values");
  int calc_d = 0;
  std::string calc_p, calc_classes;
  double calc_eta_tol = 1e-10;
  calc->add_option("--d", calc_d, "dimension")->required()->check(CLI::Range(2, 62));
  calc->add_option("--p", calc_p, "edge probability (decimal in (0, 1/2))")->required();
  calc->add_option("--classes", calc_classes, "comma-separated class sizes to expand");
  calc->add_option("--eta-tol", calc_eta_tol, "entropy tolerance for eta_star");

  // enumerate
  auto* enumerate = app.add_subcommand("enumerate", "list canonical forms of a given size");
  int enum_t = 0, enum_d = 0, enum_cap = 6;
  enumerate->add_option("--t", enum_t, "component size")->required()->check(CLI::Range(1, 7));
  enumerate->add_option("--d", enum_d, "an ambient dimension for embedding counts");
  enumerate->add_option("--cap", enum_cap, "enumeration cap")->check(CLI::Range(1, 7));

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exact laws by exhaustive enumeration (d <= 3)");
  int oracle_d = 0;
  std::string oracle_p, oracle_out;
  oracle->add_option("--d", oracle_d, "dimension")->required()->check(CLI::Range(1, 3));
  oracle->add_option("--p", oracle_p, "edge probability")->required();
  oracle->add_option("--out", oracle_out, "output path (stdout if omitted)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  int sim_d = 0, sim_workers = 0, sim_class_cap = 0, sim_d_cap = 0;
  std::string sim_d_list, sim_p, sim_out, sim_csv, sim_config, sim_checks;
  std::uint64_t sim_trials = 0, sim_seed = 0, sim_store_cap = 0;
  double sim_gamma = 0, sim_radius_frac = 0, sim_margin = 0;
  simulate->add_option("--d", sim_d, "dimension");
  simulate->add_option("--d-list", sim_d_list, "comma-separated dimensions for a trend run");
  simulate->add_option("--p", sim_p, "edge probability (decimal)");
  auto* trials_opt = simulate->add_option("--trials", sim_trials, "number of trials");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "master seed (required)");
  simulate->add_option("--workers", sim_workers, "trial-level parallelism");
  simulate->add_option("--class-cap", sim_class_cap, "max component size to classify");
  simulate->add_option("--store-cap", sim_store_cap, "explicit fragment storage cap");
  simulate->add_option("--d-cap", sim_d_cap, "memory cap on the dimension");
  simulate->add_option("--checks", sim_checks,
                       "comma list: poisson,normal,joint,local-limit,distance,clustering,"
                       "goodness,all");
  simulate->add_option("--gamma", sim_gamma, "gamma for the N_gamma bound");
  simulate->add_option("--radius-frac", sim_radius_frac, "ball radius as a fraction of d");
  simulate->add_option("--distance-margin", sim_margin, "margin inside eta* for the profile");
  simulate->add_option("--out", sim_out, "report output path (stdout if omitted)");
  simulate->add_option("--out-csv", sim_csv, "also write the CSV view");
  simulate->add_option("--config", sim_config, "JSON config file mirroring these flags");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "recompute checks from a stored report");
  std::string an_in, an_out, an_env, an_csv;
  analyze->add_option("--in", an_in, "stored SummaryReport")->required();
  analyze->add_option("--out", an_out, "write recomputed derived blocks");
  analyze->add_option("--out-csv", an_csv, "write the CSV view");
  analyze->add_option("--envelope", an_env, "envelope file to check against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (calc->parsed()) return cmd_calc(calc_d, calc_p, calc_classes, calc_eta_tol);
    if (enumerate->parsed()) return cmd_enumerate(enum_t, enum_d, enum_cap);
    if (oracle->parsed()) return cmd_oracle(oracle_d, oracle_p, oracle_out);
    if (simulate->parsed()) {
      std::optional<nlohmann::json> file_cfg;
      if (!sim_config.empty()) file_cfg = nlohmann::json::parse(read_file(sim_config));
      qpcube::ExperimentConfig cfg = config_from_cli(
          file_cfg ? &*file_cfg : nullptr, sim_d, sim_d_list, sim_p, sim_trials,
          trials_opt->count() > 0, sim_seed, seed_opt->count() > 0, sim_workers,
          sim_class_cap, sim_store_cap, sim_d_cap, sim_checks, sim_gamma, sim_radius_frac,
          sim_margin);
      return cmd_simulate(cfg, sim_out, sim_csv);
    }
    if (analyze->parsed()) return cmd_analyze(an_in, an_out, an_env, an_csv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
