#include "skde/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace skde {

namespace {

[[noreturn]] void fail_schema(const std::string& context, const std::string& detail) {
  throw ArgumentError(context + ": " + detail);
}

void check_keys(const json& j, const std::string& context,
                std::initializer_list<const char*> known) {
  if (!j.is_object()) fail_schema(context, "expected an object");
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(),
                     [&key](const char* k) { return key == k; }) == known.end()) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty()) fail_schema(context, "unknown keys: " + unknown);
}

Vector vector_from_json(const json& j, const std::string& context) {
  if (!j.is_array()) fail_schema(context, "expected an array of numbers");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail_schema(context, "expected an array of numbers");
    v(static_cast<Index>(i)) = j[i].get<Scalar>();
  }
  return v;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& j, const std::string& context) {
  if (!j.is_array() || j.empty()) fail_schema(context, "expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail_schema(context, "ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = j[r][c].get<Scalar>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

}  // namespace

std::string format_double(Scalar v) {
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, result.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << content;
  if (!out) throw ArgumentError("failed writing " + path.string());
}

json load_json(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ArgumentError(path.string() + " is not valid JSON");
  return j;
}

void save_json(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Matrix read_csv_matrix(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<Scalar>> rows;
  std::size_t cols = 0;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header && line_no == 1) continue;
    std::vector<Scalar> row;
    std::size_t begin = 0;
    while (begin <= line.size()) {
      std::size_t end = line.find(',', begin);
      if (end == std::string::npos) end = line.size();
      const std::string_view cell(line.data() + begin, end - begin);
      Scalar value = 0.0;
      const auto parsed = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (parsed.ec != std::errc() || parsed.ptr != cell.data() + cell.size())
        throw ArgumentError(path.string() + ":" + std::to_string(line_no) +
                            ": cannot parse numeric cell \"" + std::string(cell) + "\"");
      row.push_back(value);
      begin = end + 1;
      if (end == line.size()) break;
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols)
      throw ArgumentError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArgumentError(path.string() + " contains no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return m;
}

void save_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ostringstream out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out << ',';
    out << table.header[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw ArgumentError("save_csv: ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

json family_to_json(const DivergenceFamily& fam) {
  if (fam.kind() == FamilyKind::KL) return json{{"kind", "kl"}};
  return json{{"kind", "beta_power"}, {"beta", fam.beta()}};
}

DivergenceFamily family_from_json(const json& j) {
  check_keys(j, "family", {"kind", "beta"});
  const std::string kind = j.value("kind", "beta_power");
  if (kind == "kl") {
    if (j.contains("beta")) fail_schema("family", "kl takes no beta");
    return DivergenceFamily::kl();
  }
  if (kind == "beta_power") return DivergenceFamily::beta_power(j.value("beta", 1.0));
  fail_schema("family", "unknown kind \"" + kind + "\" (expected beta_power or kl)");
}

json mixture_to_json(const MixtureDensity& m) {
  json comps = json::array();
  for (const auto& c : m.components)
    comps.push_back(json{{"weight", c.weight}, {"mean", vector_to_json(c.mean)}, {"cov", matrix_to_json(c.cov)}});
  return json{{"components", comps}};
}

MixtureDensity mixture_from_json(const json& j) {
  check_keys(j, "mixture", {"components", "note"});
  if (!j.contains("components")) fail_schema("mixture", "missing components");
  MixtureDensity m;
  for (const auto& cj : j.at("components")) {
    check_keys(cj, "mixture component", {"weight", "mean", "cov"});
    MixtureComponent c;
    if (!cj.contains("weight") || !cj.contains("mean") || !cj.contains("cov"))
      fail_schema("mixture component", "needs weight, mean, cov");
    c.weight = cj.at("weight").get<Scalar>();
    c.mean = vector_from_json(cj.at("mean"), "mixture component mean");
    c.cov = matrix_from_json(cj.at("cov"), "mixture component cov");
    m.components.push_back(std::move(c));
  }
  validate_mixture(m);
  return m;
}

json dictionary_to_json(const Dictionary& dict) {
  json ladder{{"variant", ladder_variant_name(dict.ladder.variant)},
              {"values", dict.ladder.values},
              {"eta", dict.ladder.eta},
              {"j_max", dict.ladder.j_max},
              {"exponent", dict.ladder.exponent},
              {"extrapolated", dict.ladder.extrapolated}};
  Matrix centers(dict.center_count, dict.dim());
  for (Index i = 0; i < dict.center_count; ++i)
    centers.row(i) = dict.words[static_cast<std::size_t>(dict.flat_index(i, 0))].center.transpose();
  return json{{"dim", dict.dim()},
              {"index_layout", "center_major"},
              {"ladder", ladder},
              {"centers", matrix_to_json(centers)}};
}

Dictionary dictionary_from_json(const json& j) {
  check_keys(j, "dictionary", {"dim", "index_layout", "ladder", "centers"});
  if (!j.contains("ladder") || !j.contains("centers")) fail_schema("dictionary", "needs ladder and centers");
  if (j.value("index_layout", "center_major") != "center_major")
    fail_schema("dictionary", "unknown index layout");
  const json& lj = j.at("ladder");
  check_keys(lj, "ladder", {"variant", "values", "eta", "j_max", "exponent", "extrapolated"});
  BandwidthLadder ladder;
  ladder.variant = ladder_variant_from_name(lj.value("variant", "b1"));
  ladder.values = lj.at("values").get<std::vector<Scalar>>();
  ladder.eta = lj.value("eta", 0.0);
  ladder.j_max = lj.value("j_max", static_cast<int>(ladder.values.size()));
  ladder.exponent = lj.value("exponent", 0.0);
  ladder.extrapolated = lj.value("extrapolated", false);
  const Matrix centers = matrix_from_json(j.at("centers"), "dictionary centers");
  Dictionary dict = build_dictionary(centers, ladder);
  if (j.contains("dim") && j.at("dim").get<int>() != dict.dim())
    fail_schema("dictionary", "dim does not match the centers");
  return dict;
}

json estimate_to_json(const StagewiseEstimate& est) {
  json weights = json::array();
  for (const auto& term : est.combination.terms)
    weights.push_back(json{{"word", term.word}, {"weight", term.weight}});
  json trace = json::array();
  for (const auto& loss : est.loss_trace)
    trace.push_back(json{{"value", loss.value},
                         {"sample_term", loss.sample_term},
                         {"integral_term", loss.integral_term}});
  return json{{"family", family_to_json(est.combination.family)},
              {"weights", weights},
              {"chosen", est.chosen},
              {"loss_trace", trace}};
}

StagewiseEstimate estimate_from_json(const json& j) {
  check_keys(j, "estimate", {"family", "weights", "chosen", "loss_trace"});
  if (!j.contains("family") || !j.contains("weights")) fail_schema("estimate", "needs family and weights");
  StagewiseEstimate est(family_from_json(j.at("family")));
  for (const auto& wj : j.at("weights")) {
    check_keys(wj, "estimate weight", {"word", "weight"});
    est.combination.terms.push_back({wj.at("word").get<Index>(), wj.at("weight").get<Scalar>()});
  }
  std::sort(est.combination.terms.begin(), est.combination.terms.end(),
            [](const XiTerm& a, const XiTerm& b) { return a.word < b.word; });
  if (j.contains("chosen")) est.chosen = j.at("chosen").get<std::vector<Index>>();
  if (j.contains("loss_trace"))
    for (const auto& lj : j.at("loss_trace"))
      est.loss_trace.push_back(LossValue::of(lj.at("sample_term").get<Scalar>(),
                                             lj.at("integral_term").get<Scalar>()));
  return est;
}

json scenario_to_json(const ScenarioSpec& spec) {
  return json{{"name", spec.name},
              {"case", split_case_name(spec.split_case)},
              {"N", spec.sample_count},
              {"target", mixture_to_json(spec.target)},
              {"dictionary",
               json{{"variant", ladder_variant_name(spec.dict.variant)},
                    {"eta", spec.dict.eta},
                    {"j_max", spec.dict.j_max}}},
              {"family", family_to_json(spec.family)},
              {"stages", spec.stages},
              {"theta", spec.theta},
              {"epsilon", spec.epsilon},
              {"replicates", spec.replicates},
              {"seed", spec.seed},
              {"ise_resolution", spec.ise_resolution},
              {"fit_resolution", spec.fit_resolution},
              {"recorded_stages", spec.recorded_stages},
              {"finite_fourth_moment", spec.finite_fourth_moment}};
}

ScenarioSpec scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "scenario",
             {"name", "case", "N", "target", "dictionary", "family", "stages", "theta", "epsilon",
              "replicates", "seed", "ise_resolution", "fit_resolution", "recorded_stages",
              "finite_fourth_moment"});
  for (const char* required : {"name", "N", "target", "family"})
    if (!j.contains(required)) fail_schema("scenario", std::string("missing ") + required);

  ScenarioSpec spec(family_from_json(j.at("family")));
  spec.name = j.at("name").get<std::string>();
  spec.split_case = split_case_from_name(j.value("case", "e"));
  spec.sample_count = j.at("N").get<long>();
  const json& tj = j.at("target");
  if (tj.is_string()) {
    std::filesystem::path p = tj.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    spec.target = mixture_from_json(load_json(p));
  } else {
    spec.target = mixture_from_json(tj);
  }
  if (j.contains("dictionary")) {
    const json& dj = j.at("dictionary");
    check_keys(dj, "scenario dictionary", {"variant", "eta", "j_max"});
    spec.dict.variant = ladder_variant_from_name(dj.value("variant", "b1"));
    spec.dict.eta = dj.value("eta", 1.0);
    spec.dict.j_max = dj.value("j_max", 0);
  }
  spec.stages = j.value("stages", 100);
  spec.theta = j.value("theta", 2.0);
  spec.epsilon = j.value("epsilon", 0.0);
  spec.replicates = j.value("replicates", 10);
  spec.seed = j.value("seed", std::uint64_t{1});
  spec.ise_resolution = j.value("ise_resolution", 0);
  spec.fit_resolution = j.value("fit_resolution", 128);
  if (j.contains("recorded_stages"))
    spec.recorded_stages = j.at("recorded_stages").get<std::vector<int>>();
  spec.finite_fourth_moment = j.value("finite_fourth_moment", true);
  validate_scenario(spec);
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(load_json(path), path.has_parent_path() ? path.parent_path()
                                                                    : std::filesystem::path("."));
}

json risk_report_to_json(const RiskBoundReport& report) {
  return json{{"lhs", report.lhs},
              {"rhs_terms",
               json{{"hull_term", report.hull_term},
                    {"nu_term", report.nu_term},
                    {"b_term", report.b_term},
                    {"epsilon", report.epsilon}}},
              {"pass", report.pass},
              {"b_term_heuristic", report.b_term_heuristic},
              {"replicates", report.replicates},
              {"mass_mean", report.mass_mean},
              {"mass_dev_mean", report.mass_dev_mean}};
}

std::string split_case_name(SplitCase c) {
  switch (c) {
    case SplitCase::A: return "a";
    case SplitCase::B: return "b";
    case SplitCase::C: return "c";
    case SplitCase::D: return "d";
    case SplitCase::E: return "e";
  }
  throw ArgumentError("split_case_name: unknown case");
}

SplitCase split_case_from_name(const std::string& name) {
  if (name == "a") return SplitCase::A;
  if (name == "b") return SplitCase::B;
  if (name == "c") return SplitCase::C;
  if (name == "d") return SplitCase::D;
  if (name == "e") return SplitCase::E;
  throw ArgumentError("unknown split case \"" + name + "\" (expected one of a, b, c, d, e)");
}

std::string ladder_variant_name(LadderVariant v) {
  switch (v) {
    case LadderVariant::B1: return "b1";
    case LadderVariant::B2: return "b2";
    case LadderVariant::Explicit: return "explicit";
  }
  throw ArgumentError("unknown ladder variant value");
}

LadderVariant ladder_variant_from_name(const std::string& name) {
  if (name == "b1") return LadderVariant::B1;
  if (name == "b2") return LadderVariant::B2;
  if (name == "explicit") return LadderVariant::Explicit;
  throw ArgumentError("unknown ladder variant \"" + name + "\" (expected b1, b2 or explicit)");
}

}  // namespace skde
