#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "illumseg/pd_solver.hpp"
#include "illumseg/segmenter.hpp"

namespace illumseg::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kIoFailure = 3,
  kNumericFailure = 4,
};

/// Bundle manifest format version written by export-bundle.
inline constexpr int kBundleVersion = 1;
inline constexpr const char* kBundleFormat = "illumseg-bundle";

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// One row of the shipped parameter table.
struct Preset {
  std::string name;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<double> thresholds;
};

std::filesystem::path default_presets_file();
Preset load_preset(const std::filesystem::path& file, const std::string& name);

/// Applies the keys of a JSON object (named after SolverConfig fields) onto `config`.
void apply_config_json(const nlohmann::json& j, pd::SolverConfig& config);
nlohmann::json config_to_json(const pd::SolverConfig& config);

/// Parses "0.55,0.75" into interior thresholds.
seg::Thresholds parse_thresholds(const std::string& text);
/// Reads {"thresholds": [...], "K": k, ...} as produced by the explorer.
seg::Thresholds read_thresholds_file(const std::filesystem::path& file);

/// Unit-range reflectance stored in a bundle directory (export-bundle output) or,
/// for a plain decompose directory, R.f32 rescaled to [0, 1].
ScalarField load_bundle_reflectance(const std::filesystem::path& dir);

}  // namespace illumseg::cli
