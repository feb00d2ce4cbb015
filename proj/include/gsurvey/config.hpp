#pragma once

// Run configuration, stored as JSON. All sections are optional and fall back
// to the defaults below; unknown keys and out-of-range values are rejected
// with the offending field's path before any computation starts. The schema
// is published in docs/config.schema.json.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsurvey/error.hpp"
#include "gsurvey/harness.hpp"
#include "gsurvey/hypothesis_tests.hpp"
#include "gsurvey/model.hpp"

namespace gsurvey {

class ConfigError : public DataError {
 public:
  using DataError::DataError;
};

struct ExperimentSettings {
  std::size_t n_sims = 200;
  double alpha = 0.05;
  std::size_t n_permutations = 10000;
  std::vector<TestMethod> tests{TestMethod::kSign, TestMethod::kWilcoxon, TestMethod::kPermutation};
  PValueRule rule = PValueRule::kPaper;
  unsigned threads = 0;
  std::size_t ecdf_points = 101;
  Coupling coupling = Coupling::kShared;
};

struct OutputSettings {
  std::string directory;  // empty: $GSURVEY_OUTPUT_DIR, else the working directory
  std::string prefix;
};

struct RunConfig {
  GenerativeParams params{2.0, 2.0, 1.0, 0.5, 0.0};
  SurveyDesign design{20, 10, 5};
  ExperimentSettings experiment;
  SweepSettings sweep;
  Seed seed = 20250101;
  OutputSettings output;
};

// Throws ConfigError naming the field, e.g. "params.rho: must lie in [0, 1]".
RunConfig parse_run_config(std::string_view json_text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);
// Canonical JSON (every field spelled out); parse_run_config inverts it.
std::string run_config_to_json(const RunConfig& config);

}  // namespace gsurvey
