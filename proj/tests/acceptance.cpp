// Acceptance gate: runs every agreed end-to-end criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion.  Exit status is the
// number of failed criteria (0 when everything holds).
//
// Usage: acceptance <path-to-cli-binary> <path-to-configs-dir>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "skde/bounds.hpp"
#include "skde/density.hpp"
#include "skde/dictionary.hpp"
#include "skde/divergence.hpp"
#include "skde/fitter.hpp"
#include "skde/integrate.hpp"
#include "skde/io.hpp"
#include "skde/loss.hpp"
#include "skde/rng.hpp"
#include "skde/simulate.hpp"
#include "oracles.hpp"

using namespace skde;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_configs;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, ...) {
  va_list args;
  va_start(args, pattern);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared state between dependent criteria (6 feeds 8 and 9, 7 feeds 9).

struct Shared {
  std::optional<ScenarioSpec> mise_spec;           // criterion 6 design
  std::optional<RunResult> mise_run;               // criterion 6 result
  std::vector<ScenarioSpec> ordering_specs;        // criterion 7 designs
  std::optional<ScenarioSpec> half_beta_spec;      // criterion 8 comparison arm
  std::vector<long> half_beta_unique_points;       // per replicate
};

Shared g_shared;

MixtureDensity load_bimodal_target() {
  return mixture_from_json(load_json(g_configs / "type_c.json"));
}

// ---------------------------------------------------------------------------
// Criterion 1: stage weight laws sum to one.

Outcome criterion_weights() {
  Scalar max_dev = 0.0;
  bool shape_ok = true;
  for (const Scalar theta : {2.0, 3.0, 5.0}) {
    for (const int stages : {1, 2, 10, 100}) {
      const MixingCoefficients mix = mixing_coefficients(stages, theta);
      Scalar sum = 0.0;
      for (const Scalar q : mix.q) {
        sum += q;
        if (q < 0.0) shape_ok = false;
      }
      if (mix.pi.front() != 1.0) shape_ok = false;
      max_dev = std::max(max_dev, std::abs(sum - 1.0));
    }
  }
  const bool pass = shape_ok && max_dev <= 1e-12;
  return {pass, fmt("max |sum q - 1| = %.2e over theta {2,3,5} x stages {1,2,10,100}", max_dev)};
}

// ---------------------------------------------------------------------------
// Criterion 2: self-divergence vanishes; the quadratic family halves the
// integrated squared error.

Outcome criterion_divergence_identities() {
  std::mt19937_64 gen(4242);
  IntegratorSpec spec;
  spec.resolution = 1024;

  Scalar max_self = 0.0;
  const std::vector<DivergenceFamily> families = {
      DivergenceFamily::beta_power(0.5), DivergenceFamily::beta_power(1.0),
      DivergenceFamily::kl()};
  for (int i = 0; i < 20; ++i) {
    const int d = (i % 2) + 1;
    const MixtureDensity fm = oracle::random_mixture(gen, d);
    const DensityHandle f = DensityHandle::of(fm);
    for (const DivergenceFamily& fam : families) {
      max_self = std::max(max_self, std::abs(u_divergence(fam, f, f, spec)));
    }
  }

  Scalar max_gap = 0.0;
  const DivergenceFamily quadratic = DivergenceFamily::beta_power(1.0);
  for (int i = 0; i < 20; ++i) {
    const int d = (i % 2) + 1;
    const MixtureDensity fm = oracle::random_mixture(gen, d);
    const MixtureDensity gm = oracle::random_mixture(gen, d);
    const DensityHandle f = DensityHandle::of(fm);
    const DensityHandle g = DensityHandle::of(gm);
    const Scalar div = u_divergence(quadratic, f, g, spec);
    Scalar ise;
    if (d == 1) {
      ise = oracle::quad1(
          [&](Scalar x) {
            Vector p(1);
            p << x;
            const Scalar diff = f(p) - g(p);
            return diff * diff;
          },
          -12.0, 12.0, 40001);
    } else {
      ise = oracle::quad2(
          [&](Scalar x, Scalar y) {
            Vector p(2);
            p << x, y;
            const Scalar diff = f(p) - g(p);
            return diff * diff;
          },
          -10.0, 10.0, -10.0, 10.0, 1001);
    }
    max_gap = std::max(max_gap, std::abs(div - 0.5 * ise));
  }

  const bool pass = max_self <= 1e-9 && max_gap <= 1e-8;
  return {pass, fmt("max |D(f,f)| = %.2e (tol 1e-9), max |D_1 - ISE/2| = %.2e (tol 1e-8)",
                    max_self, max_gap)};
}

// ---------------------------------------------------------------------------
// Criterion 3: the closed-form log-ratio second moment matches quadrature.

Outcome criterion_curvature_closed_form() {
  Vector z0 = Vector::Zero(1);
  Vector z1 = Vector::Ones(1);
  const TripleCurvature hand = triple_curvature({z0, 1.0}, {z1, 1.0}, {z0, 1.0});
  const Scalar hand_err = std::abs(hand.j - 1.25);

  std::mt19937_64 gen(333);
  Scalar max_rel = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int d = (i % 2) + 1;
    const GaussianWord a = oracle::random_word(gen, d);
    const GaussianWord b = oracle::random_word(gen, d);
    const GaussianWord c = oracle::random_word(gen, d);
    const Scalar closed = triple_curvature(a, b, c).j;
    const Scalar quad = j_quadrature_oracle(a, b, c);
    max_rel = std::max(max_rel, std::abs(closed - quad) / std::max(1.0, std::abs(closed)));
  }

  const bool pass = hand_err <= 1e-9 && max_rel <= 1e-6;
  return {pass, fmt("hand case |J - 1.25| = %.2e, max rel gap vs quadrature = %.2e (tol 1e-6)",
                    hand_err, max_rel)};
}

// ---------------------------------------------------------------------------
// Criterion 4: the dictionary-level bound dominates every word triple.

Outcome criterion_bound_dominance() {
  RandomStream rng(77);
  Matrix centers(10, 2);
  for (Index i = 0; i < centers.rows(); ++i) {
    centers.row(i) = rng.normal_vector(2).transpose();
  }
  const Dictionary dict = build_dictionary(centers, explicit_ladder({0.9, 0.7, 0.5}));
  if (dict.size() != 30) return {false, "expected a 30-word dictionary"};

  const BklBound bound = bkl_upper_bound(dict);
  Scalar worst_ratio = 0.0;
  long violations = 0;
  for (Index a = 0; a < dict.size(); ++a) {
    for (Index b = 0; b < dict.size(); ++b) {
      for (Index c = 0; c < dict.size(); ++c) {
        const Scalar j = triple_curvature(dict.words[static_cast<std::size_t>(a)],
                                          dict.words[static_cast<std::size_t>(b)],
                                          dict.words[static_cast<std::size_t>(c)])
                             .j;
        worst_ratio = std::max(worst_ratio, j / bound.value);
        if (j > bound.value * (1.0 + 1e-12)) ++violations;
      }
    }
  }
  const bool pass = violations == 0;
  return {pass, fmt("27000 triples, bound = %.4g, worst J/bound = %.3f, violations = %ld",
                    bound.value, worst_ratio, violations)};
}

// ---------------------------------------------------------------------------
// Criterion 5: the replicated risk surrogate certificate holds.

Outcome criterion_risk_certificate() {
  const ScenarioSpec spec = load_scenario(g_configs / "scenario_c_bounds.json");
  if (spec.sample_count != 200 || spec.family.kind() != FamilyKind::KL || spec.stages != 100 ||
      spec.replicates != 20) {
    return {false, "scenario_c_bounds.json no longer matches the agreed design"};
  }
  const RiskBoundReport report = risk_bound_check(spec);
  const Scalar rhs = report.hull_term + report.nu_term + report.b_term + report.epsilon;
  const bool pass = report.pass && report.lhs <= rhs;
  return {pass, fmt("lhs = %.4g <= rhs = %.4g (hull %.4g + nu %.4g + decay %.4g), %d replicates",
                    report.lhs, rhs, report.hull_term, report.nu_term, report.b_term,
                    report.replicates)};
}

// ---------------------------------------------------------------------------
// Criterion 6: mean error descends at least twofold over one hundred stages.

Outcome criterion_mise_descent() {
  ScenarioSpec spec(DivergenceFamily::beta_power(1.0));
  spec.name = "c-mise";
  spec.split_case = SplitCase::E;
  spec.sample_count = 400;
  spec.target = load_bimodal_target();
  spec.dict.variant = LadderVariant::B1;
  spec.stages = 100;
  spec.theta = 2.0;
  spec.replicates = 10;
  spec.seed = 601;
  spec.fit_resolution = 128;
  spec.ise_resolution = 0;
  spec.recorded_stages = {1, 100};

  const RunResult run = run_scenario(spec);
  g_shared.mise_spec = spec;
  g_shared.mise_run = run;

  const Scalar first = run.mise_by_stage.front();
  const Scalar last = run.mise_by_stage.back();
  int improved = 0;
  for (Index r = 0; r < run.per_replicate_ise.rows(); ++r) {
    if (run.per_replicate_ise(r, 1) <= run.per_replicate_ise(r, 0)) ++improved;
  }
  const bool pass = last > 0.0 && std::isfinite(first) && first / last >= 2.0;
  return {pass, fmt("mean ISE stage 1 = %.4g, stage 100 = %.4g, ratio = %.2f (>= 2 required); "
                    "%d/10 replicates improved",
                    first, last, first / last, improved)};
}

// ---------------------------------------------------------------------------
// Criterion 7: splitting more data into the loss side must not hurt.

Outcome criterion_split_ordering() {
  const MixtureDensity target = load_bimodal_target();
  const std::vector<std::uint64_t> seed_families = {701, 702, 703};
  const std::vector<SplitCase> cases = {SplitCase::A, SplitCase::B, SplitCase::C};

  std::vector<std::vector<Scalar>> pooled(3);  // per case: all replicate ISEs
  int chain_hits = 0;
  std::string per_family;
  for (const std::uint64_t seed : seed_families) {
    Scalar mean_by_case[3] = {0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < cases.size(); ++c) {
      ScenarioSpec spec(DivergenceFamily::beta_power(1.0));
      spec.name = "c-split";
      spec.split_case = cases[c];
      spec.sample_count = 400;
      spec.target = target;
      spec.dict.variant = LadderVariant::B2;
      spec.dict.eta = 1.0;
      spec.stages = 100;
      spec.replicates = 10;
      spec.seed = seed;
      spec.fit_resolution = 128;
      spec.recorded_stages = {100};
      const RunResult run = run_scenario(spec);
      mean_by_case[c] = run.mise_by_stage.back();
      for (Index r = 0; r < run.per_replicate_ise.rows(); ++r) {
        pooled[c].push_back(run.per_replicate_ise(r, 0));
      }
      g_shared.ordering_specs.push_back(spec);
    }
    if (mean_by_case[0] <= mean_by_case[1] && mean_by_case[1] <= mean_by_case[2]) ++chain_hits;
    per_family += fmt(" [seed %llu: %.3g/%.3g/%.3g]",
                      static_cast<unsigned long long>(seed), mean_by_case[0], mean_by_case[1],
                      mean_by_case[2]);
  }

  Scalar pooled_mean[3];
  for (int c = 0; c < 3; ++c) {
    Scalar s = 0.0;
    for (const Scalar v : pooled[static_cast<std::size_t>(c)]) s += v;
    pooled_mean[c] = s / static_cast<Scalar>(pooled[static_cast<std::size_t>(c)].size());
  }

  const bool pass = pooled_mean[0] <= pooled_mean[2] && chain_hits >= 2;
  return {pass, fmt("pooled stage-100 MISE A/B/C = %.4g/%.4g/%.4g; full chain A<=B<=C in %d/3 "
                    "seed families%s",
                    pooled_mean[0], pooled_mean[1], pooled_mean[2], chain_hits,
                    per_family.c_str())};
}

// ---------------------------------------------------------------------------
// Criterion 8: fits condense onto few points, and the beta = 0.5 family
// condenses at least as hard on the same data.

Outcome criterion_condensation() {
  if (!g_shared.mise_run || !g_shared.mise_spec) {
    return {false, "prerequisite criterion 6 did not produce results"};
  }
  const RunResult& base = *g_shared.mise_run;

  long max_words = 0;
  Scalar max_ratio_points = 0.0;
  for (const CondensationMetrics& m : base.per_replicate_condensation) {
    max_words = std::max(max_words, m.unique_words);
    max_ratio_points = std::max(max_ratio_points, m.ratio_points);
  }

  ScenarioSpec half = *g_shared.mise_spec;
  half.family = DivergenceFamily::beta_power(0.5);
  half.fit_resolution = 64;  // grid-backed loss path; selection is what matters
  g_shared.half_beta_spec = half;

  int leaner = 0;
  g_shared.half_beta_unique_points.clear();
  for (std::uint64_t rep = 0; rep < static_cast<std::uint64_t>(half.replicates); ++rep) {
    const ReplicateOutcome out = run_replicate(half, rep);
    const CondensationMetrics m = condensation_metrics(out.estimate, out.dictionary);
    g_shared.half_beta_unique_points.push_back(m.unique_points);
    if (m.unique_points <= base.per_replicate_condensation[rep].unique_points) ++leaner;
  }

  const bool pass = max_words <= 100 && max_ratio_points < 0.5 && leaner >= 6;
  return {pass, fmt("max unique words = %ld (<= 100), max point ratio = %.3f (< 0.5); beta 0.5 "
                    "uses <= as many points in %d/10 seeds (>= 6 required)",
                    max_words, max_ratio_points, leaner)};
}

// ---------------------------------------------------------------------------
// Criterion 9: the quadratic family is exactly normalized; fractional-beta
// estimates normalize to unit mass.

Outcome criterion_normalization() {
  if (!g_shared.mise_spec || !g_shared.half_beta_spec) {
    return {false, "prerequisite criteria 6 and 8 did not produce results"};
  }

  Scalar max_gamma_dev = 0.0;
  long checked = 0;
  std::vector<ScenarioSpec> quadratic = g_shared.ordering_specs;
  quadratic.push_back(*g_shared.mise_spec);
  for (const ScenarioSpec& spec : quadratic) {
    for (std::uint64_t rep = 0; rep < static_cast<std::uint64_t>(spec.replicates); ++rep) {
      const ReplicateOutcome out = run_replicate(spec, rep);
      IntegratorSpec integ;
      const NormalizedEstimate norm = normalize(out.estimate, out.dictionary, integ);
      max_gamma_dev = std::max(max_gamma_dev, std::abs(norm.gamma - 1.0));
      ++checked;
    }
  }

  Scalar max_mass_dev = 0.0;
  const ScenarioSpec& half = *g_shared.half_beta_spec;
  for (std::uint64_t rep = 0; rep < static_cast<std::uint64_t>(half.replicates); ++rep) {
    const ReplicateOutcome out = run_replicate(half, rep);
    IntegratorSpec integ;
    integ.resolution = 512;
    const NormalizedEstimate norm = normalize(out.estimate, out.dictionary, integ);
    IntegratorSpec mass_spec;
    mass_spec.resolution = 512;
    mass_spec.bounds = bounding_box(std::span<const GaussianWord>(out.dictionary.words));
    const Scalar mass = integrate([&](const Vector& x) { return norm.density(x); }, mass_spec);
    max_mass_dev = std::max(max_mass_dev, std::abs(mass - 1.0));
  }

  const bool pass = max_gamma_dev <= 1e-6 && max_mass_dev <= 1e-6;
  return {pass, fmt("max |gamma - 1| = %.2e over %ld quadratic fits; max |mass - 1| = %.2e over "
                    "10 normalized beta-0.5 fits (tol 1e-6)",
                    max_gamma_dev, checked, max_mass_dev)};
}

// ---------------------------------------------------------------------------
// Criterion 10: manifest reruns are byte-identical at 1 and at 8 threads.

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  out += "'";
  return out;
}

int run_cli(const std::vector<std::string>& args, const fs::path& scratch) {
  std::string cmd = shell_quote(g_cli);
  for (const std::string& a : args) cmd += " " + shell_quote(a);
  cmd += " > " + shell_quote((scratch / "stdout.txt").string()) + " 2> " +
         shell_quote((scratch / "stderr.txt").string());
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool dirs_identical(const fs::path& a, const fs::path& b, const std::vector<std::string>& names,
                    std::string& mismatch) {
  for (const std::string& name : names) {
    if (slurp(a / name) != slurp(b / name) || !fs::exists(b / name)) {
      mismatch = name;
      return false;
    }
  }
  return true;
}

Outcome criterion_rerun_determinism() {
  const fs::path tmp =
      fs::temp_directory_path() / ("skde_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(tmp);
  struct Cleanup {
    fs::path p;
    ~Cleanup() { fs::remove_all(p); }
  } cleanup{tmp};

  // Deterministic sample file for the fit leg.
  {
    std::mt19937 gen(8080);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::ofstream out(tmp / "data.csv");
    out.precision(17);
    for (int i = 0; i < 60; ++i) {
      out << ((i % 2 == 0) ? -1.0 : 1.0) + noise(gen) << "," << noise(gen) << "\n";
    }
  }

  const std::vector<std::string> fit_files = {"dictionary.json", "estimate.json", "summary.json",
                                              "loss_trace.csv", "manifest.json"};
  if (run_cli({"--threads", "1", "fit", "--data", (tmp / "data.csv").string(), "--out",
               (tmp / "fit1").string(), "--beta", "1.0", "--stages", "15", "--seed", "9"},
              tmp) != 0) {
    return {false, "fit run failed: " + slurp(tmp / "stderr.txt")};
  }
  if (run_cli({"--threads", "1", "rerun", (tmp / "fit1" / "manifest.json").string(), "--out",
               (tmp / "fit_r1").string()},
              tmp) != 0 ||
      run_cli({"--threads", "8", "rerun", (tmp / "fit1" / "manifest.json").string(), "--out",
               (tmp / "fit_r8").string()},
              tmp) != 0) {
    return {false, "fit rerun failed: " + slurp(tmp / "stderr.txt")};
  }
  std::string mismatch;
  if (!dirs_identical(tmp / "fit1", tmp / "fit_r1", fit_files, mismatch) ||
      !dirs_identical(tmp / "fit1", tmp / "fit_r8", fit_files, mismatch)) {
    return {false, "fit rerun differs in " + mismatch};
  }

  const std::vector<std::string> sim_files = {"results.csv", "replicates.csv",
                                              "condensation.csv", "manifest.json"};
  if (run_cli({"--threads", "1", "simulate", "--scenario",
               (g_configs / "scenario_c_small.json").string(), "--out", (tmp / "sim1").string()},
              tmp) != 0) {
    return {false, "simulate run failed: " + slurp(tmp / "stderr.txt")};
  }
  if (run_cli({"--threads", "8", "rerun", (tmp / "sim1" / "manifest.json").string(), "--out",
               (tmp / "sim_r8").string()},
              tmp) != 0) {
    return {false, "simulate rerun failed: " + slurp(tmp / "stderr.txt")};
  }
  if (!dirs_identical(tmp / "sim1", tmp / "sim_r8", sim_files, mismatch)) {
    return {false, "simulate rerun differs in " + mismatch};
  }

  return {true, "fit and simulate reruns byte-identical at 1 and 8 worker threads"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <cli-binary> <configs-dir>\n");
    return 2;
  }
  g_cli = argv[1];
  g_configs = argv[2];
  if (!fs::exists(g_cli) || !fs::exists(g_configs / "type_c.json")) {
    std::fprintf(stderr, "acceptance: bad cli path or configs dir\n");
    return 2;
  }

  struct Criterion {
    const char* label;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"stage weight laws sum to one", criterion_weights},
      {"divergence identities (self-zero, quadratic = half ISE)", criterion_divergence_identities},
      {"closed-form curvature integrals match quadrature", criterion_curvature_closed_form},
      {"dictionary bound dominates every word triple", criterion_bound_dominance},
      {"replicated risk certificate holds (bimodal, KL, N=200)", criterion_risk_certificate},
      {"mean ISE descends >= 2x over 100 stages (bimodal, N=400)", criterion_mise_descent},
      {"loss-heavy splits rank no worse than dictionary-heavy ones", criterion_split_ordering},
      {"estimates condense; beta 0.5 condenses at least as hard", criterion_condensation},
      {"unit-mass normalization across families", criterion_normalization},
      {"manifest reruns byte-identical at 1 and 8 threads", criterion_rerun_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].fn();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu  %s  %s — %s [%.1fs]\n", i + 1,
                outcome.pass ? "PASS" : "FAIL", criteria[i].label, outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }

  if (failures == 0) {
    std::printf("acceptance: all %zu criteria passed\n", criteria.size());
  } else {
    std::printf("acceptance: %d of %zu criteria FAILED\n", failures, criteria.size());
  }
  return failures == 0 ? 0 : 1;
}
