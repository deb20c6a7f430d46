// skde: stagewise kernel density estimation over a Gaussian-word dictionary.
//
// Subcommands: fit, simulate, bounds, ise, rerun.  Every run writes a
// manifest.json echoing its resolved options; `skde rerun manifest.json`
// reproduces the outputs byte for byte.  The thread budget is a runtime knob
// and deliberately not part of the manifest.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <set>

#include "skde/bounds.hpp"
#include "skde/io.hpp"
#include "skde/parallel.hpp"

namespace fs = std::filesystem;
using namespace skde;

namespace {

constexpr const char* kManifestSchema = "skde-manifest-1";

void write_manifest(const fs::path& out_dir, const std::string& subcommand, const json& options) {
  save_json(out_dir / "manifest.json",
            json{{"schema", kManifestSchema}, {"subcommand", subcommand}, {"options", options}});
}

std::string family_cell(const DivergenceFamily& fam) {
  return fam.kind() == FamilyKind::KL ? "kl" : format_double(fam.beta());
}

// ---------------------------------------------------------------------------
// fit

void run_fit(const json& options, const fs::path& out_dir) {
  const Matrix data = read_csv_matrix(options.at("data").get<std::string>(),
                                      options.at("header").get<bool>());
  const DivergenceFamily family = family_from_json(options.at("family"));
  const SplitCase split_case = split_case_from_name(options.at("case").get<std::string>());
  const auto seed = options.at("seed").get<std::uint64_t>();

  RandomStream rng(seed);
  SplitSample split = split_sample(data, split_case, rng);

  const auto variant = ladder_variant_from_name(options.at("dict").get<std::string>());
  int j_max = options.at("j_max").get<int>();
  if (j_max == 0) j_max = variant == LadderVariant::B1 ? 5 : 10;
  const BandwidthLadder ladder =
      variant == LadderVariant::B1
          ? build_b1(split.dictionary_points, j_max)
          : build_b2(split.dictionary_points, options.at("eta").get<Scalar>(), j_max);
  const Dictionary dict = build_dictionary(split.dictionary_points, ladder);

  FitConfig cfg(family);
  cfg.stages = options.at("stages").get<int>();
  cfg.theta = options.at("theta").get<Scalar>();
  cfg.epsilon = options.at("epsilon").get<Scalar>();
  cfg.integ.resolution = options.at("grid_res").get<int>();
  const StagewiseEstimate est = fit(dict, split.loss_points, cfg);

  IntegratorSpec norm_spec;
  norm_spec.resolution = default_resolution(dict.dim());
  const NormalizedEstimate normalized = normalize(est, dict, norm_spec);
  const CondensationMetrics cm = condensation_metrics(est, dict);

  save_json(out_dir / "dictionary.json", dictionary_to_json(dict));
  save_json(out_dir / "estimate.json", estimate_to_json(est));
  save_json(out_dir / "summary.json",
            json{{"final_loss", est.loss_trace.back().value},
                 {"gamma", normalized.gamma},
                 {"condensation",
                  json{{"unique_points", cm.unique_points},
                       {"unique_words", cm.unique_words},
                       {"ratio_points", cm.ratio_points},
                       {"ratio_words", cm.ratio_words}}}});

  CsvTable trace;
  trace.header = {"stage", "word", "value", "sample_term", "integral_term"};
  for (std::size_t k = 0; k < est.loss_trace.size(); ++k)
    trace.rows.push_back({std::to_string(k + 1), std::to_string(est.chosen[k]),
                          format_double(est.loss_trace[k].value),
                          format_double(est.loss_trace[k].sample_term),
                          format_double(est.loss_trace[k].integral_term)});
  save_csv(out_dir / "loss_trace.csv", trace);
  write_manifest(out_dir, "fit", options);

  std::cout << "fit: " << dict.size() << " words, " << cfg.stages << " stages, final loss "
            << format_double(est.loss_trace.back().value) << ", mass " << format_double(normalized.gamma)
            << ", " << cm.unique_words << " unique words on " << cm.unique_points
            << " unique points\n"
            << "outputs in " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// simulate

ScenarioSpec scenario_from_options(const json& options) {
  ScenarioSpec spec = scenario_from_json(options.at("scenario"), fs::current_path());
  return spec;
}

void run_simulate(const json& options, const fs::path& out_dir) {
  const ScenarioSpec spec = scenario_from_options(options);
  const RunResult result = run_scenario(spec);

  CsvTable results;
  results.header = {"scenario", "case", "N",  "beta",         "stage",
                    "mise",     "sd",   "ratio_points", "ratio_words", "seed"};
  for (std::size_t si = 0; si < result.stages.size(); ++si)
    results.rows.push_back({spec.name, split_case_name(spec.split_case),
                            std::to_string(spec.sample_count), family_cell(spec.family),
                            std::to_string(result.stages[si]), format_double(result.mise_by_stage[si]),
                            format_double(result.mise_sd[si]),
                            format_double(result.condensation.ratio_points),
                            format_double(result.condensation.ratio_words),
                            std::to_string(spec.seed)});
  save_csv(out_dir / "results.csv", results);

  CsvTable replicates;
  replicates.header = {"scenario", "replicate", "stage", "ise"};
  for (Index r = 0; r < result.per_replicate_ise.rows(); ++r)
    for (std::size_t si = 0; si < result.stages.size(); ++si)
      replicates.rows.push_back({spec.name, std::to_string(r), std::to_string(result.stages[si]),
                                 format_double(result.per_replicate_ise(r, static_cast<Index>(si)))});
  save_csv(out_dir / "replicates.csv", replicates);

  CsvTable condensation;
  condensation.header = {"scenario", "replicate", "unique_points", "unique_words", "ratio_points",
                         "ratio_words"};
  for (std::size_t r = 0; r < result.per_replicate_condensation.size(); ++r) {
    const auto& cm = result.per_replicate_condensation[r];
    condensation.rows.push_back({spec.name, std::to_string(r), std::to_string(cm.unique_points),
                                 std::to_string(cm.unique_words), format_double(cm.ratio_points),
                                 format_double(cm.ratio_words)});
  }
  save_csv(out_dir / "condensation.csv", condensation);
  write_manifest(out_dir, "simulate", options);

  std::cout << "simulate " << spec.name << ": " << spec.replicates << " replicates\n";
  for (std::size_t si = 0; si < result.stages.size(); ++si)
    std::cout << "  stage " << result.stages[si] << ": mise "
              << format_double(result.mise_by_stage[si]) << " (sd "
              << format_double(result.mise_sd[si]) << ")\n";
  std::cout << "outputs in " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// bounds

void run_bounds(const json& options, const fs::path& out_dir) {
  const ScenarioSpec spec = scenario_from_options(options);
  const RiskBoundReport report = risk_bound_check(spec);
  save_json(out_dir / "risk_bound.json", risk_report_to_json(report));

  // Worst-case curvature table on the first replicate's dictionary.
  const Dictionary dict = run_replicate(spec, 0).dictionary;
  const BklBound bkl = bkl_upper_bound(dict);
  const long triples = options.at("triples").get<long>();
  RandomStream rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  CsvTable table;
  table.header = {"i", "j", "k", "c1", "c2_norm", "c3", "j_closed", "j_oracle", "rel_gap"};
  bool dominated = true;
  for (long t = 0; t < triples; ++t) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dict.size())));
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dict.size())));
    const auto k = static_cast<Index>(rng.below(static_cast<std::uint64_t>(dict.size())));
    const auto& wa = dict.words[static_cast<std::size_t>(i)];
    const auto& wb = dict.words[static_cast<std::size_t>(j)];
    const auto& wc = dict.words[static_cast<std::size_t>(k)];
    const TripleCurvature cc = triple_curvature(wa, wb, wc);
    const Scalar oracle = j_quadrature_oracle(wa, wb, wc);
    const Scalar gap = std::abs(cc.j - oracle) / std::max(Scalar(1), std::abs(oracle));
    dominated = dominated && cc.j <= bkl.value * (1.0 + 1e-12);
    table.rows.push_back({std::to_string(i), std::to_string(j), std::to_string(k),
                          format_double(cc.c1), format_double(cc.c2.norm()), format_double(cc.c3),
                          format_double(cc.j), format_double(oracle), format_double(gap)});
  }
  save_csv(out_dir / "curvature_table.csv", table);
  save_json(out_dir / "bounds_summary.json",
            json{{"bkl",
                  json{{"value", bkl.value},
                       {"h_min", bkl.h_min},
                       {"h_max", bkl.h_max},
                       {"h_ratio", bkl.h_ratio},
                       {"radius_sq", bkl.radius_sq}}},
                 {"triples_checked", triples},
                 {"dominance_ok", dominated}});
  write_manifest(out_dir, "bounds", options);

  std::cout << "bounds " << spec.name << ": lhs " << format_double(report.lhs) << " vs rhs "
            << format_double(report.hull_term + report.nu_term + report.b_term + report.epsilon)
            << " -> " << (report.pass ? "pass" : "FAIL")
            << (report.b_term_heuristic ? " (b term heuristic)" : "") << "\n"
            << "outputs in " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// ise

void run_ise(const json& options, const fs::path& out_dir) {
  const StagewiseEstimate est = estimate_from_json(load_json(options.at("estimate").get<std::string>()));
  const Dictionary dict = dictionary_from_json(load_json(options.at("dictionary").get<std::string>()));
  const MixtureDensity target = mixture_from_json(load_json(options.at("target").get<std::string>()));

  const DensityHandle est_handle = DensityHandle::of(est.combination, dict.words);
  const DensityHandle target_handle = DensityHandle::of(target);

  IntegratorSpec spec;
  const int res = options.at("grid_res").get<int>();
  spec.resolution = res > 0 ? res : default_resolution(dict.dim());
  spec.bounds = box_union(bounding_box(target),
                          bounding_box(std::span<const GaussianWord>(dict.words)));

  const Scalar raw = ise(est_handle, target_handle, spec);
  const NormalizedEstimate normalized = normalize(est, dict, spec);
  const Scalar adjusted = ise(normalized.density, target_handle, spec);

  save_json(out_dir / "ise.json",
            json{{"ise", raw}, {"ise_normalized", adjusted}, {"gamma", normalized.gamma}});
  write_manifest(out_dir, "ise", options);
  std::cout << "ise " << format_double(raw) << " (normalized " << format_double(adjusted)
            << ", mass " << format_double(normalized.gamma) << ")\n"
            << "outputs in " << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------

void dispatch(const std::string& subcommand, const json& options, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  if (subcommand == "fit")
    run_fit(options, out_dir);
  else if (subcommand == "simulate")
    run_simulate(options, out_dir);
  else if (subcommand == "bounds")
    run_bounds(options, out_dir);
  else if (subcommand == "ise")
    run_ise(options, out_dir);
  else
    throw ArgumentError("manifest names unknown subcommand \"" + subcommand + "\"");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stagewise kernel density estimation over a Gaussian-word dictionary"};
  app.require_subcommand(1);

  int threads = 1;
  app.add_option("--threads", threads, "worker thread budget (does not affect results)")
      ->envname("SKDE_THREADS")
      ->check(CLI::PositiveNumber);

  // fit ---------------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "fit a stagewise estimate to CSV data");
  std::string fit_data, fit_out, fit_case = "e", fit_dict = "b1";
  bool fit_header = false, fit_kl = false;
  double fit_beta = 1.0, fit_theta = 2.0, fit_epsilon = 0.0, fit_eta = 1.0;
  int fit_stages = 100, fit_jmax = 0, fit_grid = 128;
  std::uint64_t fit_seed = 1;
  fit_cmd->add_option("--data", fit_data, "numeric CSV, one row per observation")->required();
  fit_cmd->add_option("--out", fit_out, "output directory")->required();
  fit_cmd->add_flag("--header", fit_header, "skip the first CSV line");
  fit_cmd->add_option("--case", fit_case, "sample split: a, b, c, d or e")
      ->envname("SKDE_CASE")
      ->check(CLI::IsMember({"a", "b", "c", "d", "e"}));
  fit_cmd->add_option("--beta", fit_beta, "power-family exponent in (0, 1]")->envname("SKDE_BETA");
  fit_cmd->add_flag("--kl", fit_kl, "use the KL family instead of a power family");
  fit_cmd->add_option("--theta", fit_theta, "stage step parameter, >= 2")->envname("SKDE_THETA");
  fit_cmd->add_option("--stages", fit_stages, "number of stages")->envname("SKDE_STAGES");
  fit_cmd->add_option("--epsilon", fit_epsilon, "selection slack recorded in reports");
  fit_cmd->add_option("--dict", fit_dict, "bandwidth ladder: b1 or b2")
      ->envname("SKDE_DICT")
      ->check(CLI::IsMember({"b1", "b2"}));
  fit_cmd->add_option("--eta", fit_eta, "b2 ladder spacing, >= 0")->envname("SKDE_ETA");
  fit_cmd->add_option("--j-max", fit_jmax, "ladder length (0 = variant default)");
  fit_cmd->add_option("--seed", fit_seed, "split shuffle seed")->envname("SKDE_SEED");
  fit_cmd->add_option("--grid-res", fit_grid, "loss grid resolution for 0 < beta < 1")
      ->envname("SKDE_GRID_RES");

  // simulate ----------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "run a replicated scenario");
  std::string sim_scenario, sim_out;
  int sim_replicates = 0;
  sim_cmd->add_option("--scenario", sim_scenario, "scenario JSON file")->required();
  sim_cmd->add_option("--out", sim_out, "output directory")->required();
  sim_cmd->add_option("--replicates", sim_replicates, "override the scenario replicate count")
      ->envname("SKDE_REPLICATES");

  // bounds ------------------------------------------------------------------
  auto* bounds_cmd = app.add_subcommand("bounds", "bound checks and closed-form tables");
  std::string bounds_scenario, bounds_out;
  int bounds_replicates = 0;
  long bounds_triples = 20;
  bounds_cmd->add_option("--scenario", bounds_scenario, "scenario JSON file")->required();
  bounds_cmd->add_option("--out", bounds_out, "output directory")->required();
  bounds_cmd->add_option("--replicates", bounds_replicates, "override the scenario replicate count")
      ->envname("SKDE_REPLICATES");
  bounds_cmd->add_option("--triples", bounds_triples, "random word triples in the J table");

  // ise ---------------------------------------------------------------------
  auto* ise_cmd = app.add_subcommand("ise", "integrated squared error of a saved estimate");
  std::string ise_est, ise_dict, ise_target, ise_out;
  int ise_grid = 0;
  ise_cmd->add_option("--estimate", ise_est, "estimate.json from a fit run")->required();
  ise_cmd->add_option("--dictionary", ise_dict, "dictionary.json from the same run")->required();
  ise_cmd->add_option("--target", ise_target, "target mixture JSON")->required();
  ise_cmd->add_option("--out", ise_out, "output directory")->required();
  ise_cmd->add_option("--grid-res", ise_grid, "quadrature resolution (0 = default)")
      ->envname("SKDE_GRID_RES");

  // rerun -------------------------------------------------------------------
  auto* rerun_cmd = app.add_subcommand("rerun", "reproduce a run from its manifest");
  std::string rerun_manifest, rerun_out;
  rerun_cmd->add_option("manifest", rerun_manifest, "manifest.json of a previous run")->required();
  rerun_cmd->add_option("--out", rerun_out, "output directory (default: the manifest's)");

  CLI11_PARSE(app, argc, argv);

  try {
    set_thread_budget(threads);
    if (*fit_cmd) {
      json family = fit_kl ? json{{"kind", "kl"}} : json{{"kind", "beta_power"}, {"beta", fit_beta}};
      if (fit_kl && fit_cmd->count("--beta") > 0)
        throw ArgumentError("--kl and --beta are mutually exclusive");
      const json options{{"data", fs::absolute(fit_data).string()},
                         {"header", fit_header},
                         {"case", fit_case},
                         {"family", family},
                         {"theta", fit_theta},
                         {"stages", fit_stages},
                         {"epsilon", fit_epsilon},
                         {"dict", fit_dict},
                         {"eta", fit_eta},
                         {"j_max", fit_jmax},
                         {"seed", fit_seed},
                         {"grid_res", fit_grid}};
      dispatch("fit", options, fit_out);
    } else if (*sim_cmd) {
      // Inline the resolved scenario so the manifest is self-contained.
      ScenarioSpec spec = load_scenario(sim_scenario);
      if (sim_replicates > 0) spec.replicates = sim_replicates;
      const json options{{"scenario", scenario_to_json(spec)}};
      dispatch("simulate", options, sim_out);
    } else if (*bounds_cmd) {
      ScenarioSpec spec = load_scenario(bounds_scenario);
      if (bounds_replicates > 0) spec.replicates = bounds_replicates;
      const json options{{"scenario", scenario_to_json(spec)}, {"triples", bounds_triples}};
      dispatch("bounds", options, bounds_out);
    } else if (*ise_cmd) {
      const json options{{"estimate", fs::absolute(ise_est).string()},
                         {"dictionary", fs::absolute(ise_dict).string()},
                         {"target", fs::absolute(ise_target).string()},
                         {"grid_res", ise_grid}};
      dispatch("ise", options, ise_out);
    } else if (*rerun_cmd) {
      const json manifest = load_json(rerun_manifest);
      if (!manifest.is_object() || manifest.value("schema", "") != kManifestSchema)
        throw ArgumentError(rerun_manifest + " is not a manifest this tool understands");
      const fs::path out_dir = rerun_out.empty()
                                   ? fs::path(rerun_manifest).parent_path()
                                   : fs::path(rerun_out);
      dispatch(manifest.at("subcommand").get<std::string>(), manifest.at("options"), out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
