#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "skde/bounds.hpp"
#include "skde/dictionary.hpp"
#include "skde/fitter.hpp"
#include "skde/simulate.hpp"

namespace skde {

using nlohmann::json;

/// Shortest round-trip decimal form of a double.
std::string format_double(Scalar v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& j);

/// Numeric CSV -> matrix.  Every row must have the same number of fields.
Matrix read_csv_matrix(const std::filesystem::path& path, bool header);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void save_csv(const std::filesystem::path& path, const CsvTable& table);

json family_to_json(const DivergenceFamily& fam);
DivergenceFamily family_from_json(const json& j);

json mixture_to_json(const MixtureDensity& m);
MixtureDensity mixture_from_json(const json& j);

json dictionary_to_json(const Dictionary& dict);
Dictionary dictionary_from_json(const json& j);

json estimate_to_json(const StagewiseEstimate& est);
StagewiseEstimate estimate_from_json(const json& j);

json scenario_to_json(const ScenarioSpec& spec);
/// `base_dir` anchors a relative "target" file reference.
ScenarioSpec scenario_from_json(const json& j, const std::filesystem::path& base_dir);
ScenarioSpec load_scenario(const std::filesystem::path& path);

json risk_report_to_json(const RiskBoundReport& report);

std::string split_case_name(SplitCase c);
SplitCase split_case_from_name(const std::string& name);
std::string ladder_variant_name(LadderVariant v);
LadderVariant ladder_variant_from_name(const std::string& name);

}  // namespace skde
