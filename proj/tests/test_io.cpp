#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "skde/io.hpp"
#include "oracles.hpp"

using namespace skde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("skde_io_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Matrix tiny_points() {
  Matrix pts(8, 2);
  pts << -1.0, 0.2, 1.0, -0.3, 0.5, 0.8, -0.7, -0.6, 0.1, 0.4, -0.2, 1.1, 0.9, -0.9, -1.2, 0.3;
  return pts;
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  for (const Scalar v : {0.1, 1.0 / 3.0, -2.5e-87, 3.14159265358979, 1e300, 0.0}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("text and json files round-trip through disk") {
  TempDir tmp;
  const fs::path p = tmp.path / "x.json";
  save_json(p, json{{"a", 1}, {"b", "two"}});
  const json back = load_json(p);
  CHECK(back.at("a") == 1);
  CHECK(back.at("b") == "two");
  const std::string text = read_text_file(p);
  CHECK(text.back() == '\n');

  CHECK_THROWS_AS(load_json(tmp.path / "missing.json"), ArgumentError);
  write_text_file(tmp.path / "bad.json", "{not json");
  CHECK_THROWS_AS(load_json(tmp.path / "bad.json"), ArgumentError);
}

TEST_CASE("csv matrices read with and without headers") {
  TempDir tmp;
  const fs::path p = tmp.path / "data.csv";
  write_text_file(p, "x,y\n1.5,2\n-0.25,1e-3\n");
  const Matrix m = read_csv_matrix(p, true);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(1, 1) == 1e-3);

  write_text_file(p, "3,4\n5,6\n");
  const Matrix no_header = read_csv_matrix(p, false);
  CHECK(no_header(1, 0) == 5.0);
}

TEST_CASE("csv errors carry the offending line") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.csv";
  write_text_file(p, "1,2\n3\n");
  try {
    read_csv_matrix(p, false);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("ragged") != std::string::npos);
  }

  write_text_file(p, "1,abc\n");
  CHECK_THROWS_AS(read_csv_matrix(p, false), ArgumentError);
  CHECK_THROWS_AS(read_csv_matrix(tmp.path / "absent.csv", false), ArgumentError);
}

TEST_CASE("csv save emits header plus rows") {
  TempDir tmp;
  CsvTable table;
  table.header = {"a", "b"};
  table.rows = {{"1", "x"}, {"2", "y"}};
  const fs::path p = tmp.path / "t.csv";
  save_csv(p, table);
  CHECK(read_text_file(p) == "a,b\n1,x\n2,y\n");
}

TEST_CASE("family serialization round-trips and rejects contradictions") {
  const json kl = family_to_json(DivergenceFamily::kl());
  CHECK(family_from_json(kl).kind() == FamilyKind::KL);

  const json half = family_to_json(DivergenceFamily::beta_power(0.5));
  const DivergenceFamily back = family_from_json(half);
  CHECK(back.kind() == FamilyKind::BetaPower);
  CHECK(back.beta() == 0.5);

  CHECK_THROWS_AS(family_from_json(json{{"kind", "kl"}, {"beta", 0.5}}), ArgumentError);
  CHECK_THROWS_AS(family_from_json(json{{"kind", "mystery"}}), ArgumentError);
  CHECK(family_from_json(json{{"kind", "beta_power"}}).is_beta(1.0));
  CHECK_THROWS_AS(family_from_json(json{{"kind", "beta_power"}, {"beta", 0.5}, {"x", 1}}),
                  ArgumentError);
}

TEST_CASE("mixture serialization round-trips") {
  MixtureDensity mix;
  Matrix cov(2, 2);
  cov << 0.5, 0.1, 0.1, 0.7;
  Vector mean(2);
  mean << -1.0, 0.5;
  mix.components.push_back({0.4, mean, cov});
  mean << 1.0, -0.5;
  mix.components.push_back({0.6, mean, Matrix::Identity(2, 2) * 0.3});

  const MixtureDensity back = mixture_from_json(mixture_to_json(mix));
  REQUIRE(back.components.size() == 2);
  CHECK(back.components[0].weight == 0.4);
  CHECK((back.components[0].cov - cov).norm() == 0.0);
  CHECK((back.components[1].mean - mean).norm() == 0.0);

  CHECK_THROWS_AS(mixture_from_json(json{{"components", json::array()}}), ArgumentError);
  json bad = mixture_to_json(mix);
  bad["components"][0]["weight"] = 0.9;  // no longer sums to 1
  CHECK_THROWS_AS(mixture_from_json(bad), ArgumentError);
  json unknown = mixture_to_json(mix);
  unknown["surprise"] = 1;
  CHECK_THROWS_AS(mixture_from_json(unknown), ArgumentError);
}

TEST_CASE("dictionary serialization preserves the word set") {
  const Matrix pts = tiny_points();
  const Dictionary dict = build_dictionary(pts, build_b2(pts, 1.0, 4));
  const Dictionary back = dictionary_from_json(dictionary_to_json(dict));
  REQUIRE(back.size() == dict.size());
  CHECK(back.center_count == dict.center_count);
  CHECK(back.ladder.variant == dict.ladder.variant);
  CHECK(back.ladder.eta == dict.ladder.eta);
  for (Index s = 0; s < dict.size(); ++s) {
    CHECK((back.words[static_cast<std::size_t>(s)].center -
           dict.words[static_cast<std::size_t>(s)].center)
              .norm() == 0.0);
    CHECK(back.words[static_cast<std::size_t>(s)].h == dict.words[static_cast<std::size_t>(s)].h);
  }
}

TEST_CASE("estimate serialization round-trips weights, chosen words and the trace") {
  const Matrix pts = tiny_points();
  const Dictionary dict = build_dictionary(pts, build_b1(pts, 3));
  FitConfig cfg(DivergenceFamily::beta_power(1.0));
  cfg.stages = 6;
  const StagewiseEstimate est = fit(dict, pts, cfg);

  const StagewiseEstimate back = estimate_from_json(estimate_to_json(est));
  CHECK(back.chosen == est.chosen);
  REQUIRE(back.combination.terms.size() == est.combination.terms.size());
  for (std::size_t t = 0; t < est.combination.terms.size(); ++t) {
    CHECK(back.combination.terms[t].word == est.combination.terms[t].word);
    CHECK(back.combination.terms[t].weight == est.combination.terms[t].weight);
  }
  REQUIRE(back.loss_trace.size() == est.loss_trace.size());
  for (std::size_t k = 0; k < est.loss_trace.size(); ++k) {
    CHECK(back.loss_trace[k].value == est.loss_trace[k].value);
    CHECK(back.loss_trace[k].sample_term == est.loss_trace[k].sample_term);
  }
  CHECK(back.combination.family.is_beta(1.0));
}

TEST_CASE("scenario serialization applies defaults and validates") {
  json j{{"name", "demo"},
         {"N", 80},
         {"target", mixture_to_json([] {
            MixtureDensity m;
            m.components.push_back({1.0, Vector::Zero(2), Matrix::Identity(2, 2)});
            return m;
          }())},
         {"family", json{{"kind", "kl"}}}};
  const ScenarioSpec spec = scenario_from_json(j, fs::current_path());
  CHECK(spec.name == "demo");
  CHECK(spec.sample_count == 80);
  CHECK(spec.split_case == SplitCase::E);
  CHECK(spec.stages == 100);
  CHECK(spec.theta == 2.0);
  CHECK(spec.replicates == 10);
  CHECK(spec.seed == 1);
  CHECK(spec.dict.variant == LadderVariant::B1);
  CHECK(spec.recorded_stages == std::vector<int>{1, 25, 50, 75, 100});
  CHECK(spec.finite_fourth_moment);

  // Round trip through the writer.
  const ScenarioSpec back = scenario_from_json(scenario_to_json(spec), fs::current_path());
  CHECK(back.name == spec.name);
  CHECK(back.sample_count == spec.sample_count);
  CHECK(back.stages == spec.stages);

  json missing = j;
  missing.erase("family");
  CHECK_THROWS_AS(scenario_from_json(missing, fs::current_path()), ArgumentError);
  json unknown = j;
  unknown["bogus"] = true;
  CHECK_THROWS_AS(scenario_from_json(unknown, fs::current_path()), ArgumentError);
  json invalid = j;
  invalid["N"] = 81;  // not divisible by 4
  CHECK_THROWS_AS(scenario_from_json(invalid, fs::current_path()), ArgumentError);
}

TEST_CASE("scenario target may be a file path resolved against the scenario directory") {
  TempDir tmp;
  MixtureDensity m;
  m.components.push_back({1.0, Vector::Zero(2), Matrix::Identity(2, 2)});
  save_json(tmp.path / "target.json", mixture_to_json(m));
  save_json(tmp.path / "scenario.json", json{{"name", "filetarget"},
                                             {"N", 40},
                                             {"target", "target.json"},
                                             {"family", json{{"kind", "beta_power"}, {"beta", 1.0}}}});
  const ScenarioSpec spec = load_scenario(tmp.path / "scenario.json");
  CHECK(spec.target.components.size() == 1);
  CHECK(spec.name == "filetarget");
}

TEST_CASE("risk report serialization carries all terms") {
  RiskBoundReport r;
  r.lhs = 0.25;
  r.hull_term = 0.3;
  r.nu_term = 0.1;
  r.b_term = 2.0;
  r.epsilon = 0.0;
  r.pass = true;
  r.b_term_heuristic = true;
  r.replicates = 4;
  r.mass_mean = 0.99;
  r.mass_dev_mean = 0.01;
  const json j = risk_report_to_json(r);
  CHECK(j.at("lhs") == 0.25);
  CHECK(j.at("rhs_terms").at("hull_term") == 0.3);
  CHECK(j.at("rhs_terms").at("nu_term") == 0.1);
  CHECK(j.at("rhs_terms").at("b_term") == 2.0);
  CHECK(j.at("pass") == true);
  CHECK(j.at("b_term_heuristic") == true);
  CHECK(j.at("replicates") == 4);
}

TEST_CASE("name maps for split cases and ladder variants") {
  CHECK(split_case_name(SplitCase::A) == "a");
  CHECK(split_case_name(SplitCase::E) == "e");
  CHECK(split_case_from_name("c") == SplitCase::C);
  CHECK_THROWS_AS(split_case_from_name("z"), ArgumentError);
  CHECK(ladder_variant_name(LadderVariant::B2) == "b2");
  CHECK(ladder_variant_from_name("explicit") == LadderVariant::Explicit);
  CHECK_THROWS_AS(ladder_variant_from_name("b3"), ArgumentError);
}
