#pragma once

// Monte Carlo experiments: Type-I error and power profiles on simulated
// surveys, the budget allocation sweep, and the resampling protocols used on
// ingested data (null split of one message's perturbations, sub-sampling to
// a smaller design).
//
// Every run is a pure function of its configuration and master seed.
// Simulation s is seeded with substream_seed(master_seed, s), so thread count
// never changes the output.

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsurvey/hypothesis_tests.hpp"
#include "gsurvey/model.hpp"
#include "gsurvey/rng.hpp"

namespace gsurvey {

struct ExperimentConfig {
  GenerativeParams params;
  SurveyDesign design;
  std::size_t n_sims = 200;
  double alpha = 0.05;
  std::size_t n_permutations = 10000;
  std::vector<TestMethod> tests{TestMethod::kSign, TestMethod::kPermutation};
  Seed master_seed = 0;
  PValueRule rule = PValueRule::kPaper;
  unsigned threads = 0;
  Coupling coupling = Coupling::kShared;

  ExperimentConfig(GenerativeParams p, SurveyDesign d) : params(p), design(d) {}
  // Throws ParameterError on n_sims == 0, empty tests, alpha outside (0,1) or
  // n_permutations == 0.
  void validate() const;
};

struct TestProfile {
  TestMethod method = TestMethod::kSign;
  double rejection_rate = 0.0;
  double mc_se = 0.0;  // sqrt(rate (1 - rate) / n_sims)
  std::vector<double> p_values;
  std::vector<double> statistics;
  std::size_t n_degenerate = 0;
};

struct RejectionProfile {
  double alpha = 0.05;
  std::size_t n_sims = 0;
  std::vector<TestProfile> tests;

  // Throws DataError if `method` was not run.
  const TestProfile& at(TestMethod method) const;
};

// Requires params.beta1() == 0.
RejectionProfile run_validity_profile(const ExperimentConfig& config);
// Any beta1; with beta1 == 0 this is a validity profile.
RejectionProfile run_power_profile(const ExperimentConfig& config);

// Aggregates per-simulation results into a profile.
RejectionProfile summarize(const std::vector<std::vector<TestResult>>& per_sim_results,
                           const std::vector<TestMethod>& tests, double alpha);

// ----- empirical CDFs --------------------------------------------------------

std::vector<double> uniform_grid(std::size_t points);
// F_n(x) = #{p <= x} / n at each grid point.
std::vector<double> ecdf_on_grid(const std::vector<double>& values, const std::vector<double>& grid);
// Pointwise median across curves evaluated on one grid.
std::vector<double> median_curve(const std::vector<std::vector<double>>& curves);

struct KsStatistic {
  double d = 0.0;        // sup |F_n(x) - x|
  double d_plus = 0.0;   // sup (F_n(x) - x): ECDF above the diagonal
  double d_minus = 0.0;  // sup (x - F_n(x))
};
KsStatistic ks_uniform(std::vector<double> values);
// Asymptotic two-sided critical value sqrt(-ln(level/2)/2) / sqrt(n).
double ks_critical_value(std::size_t n, double level);
// Asymptotic one-sided critical value sqrt(-ln(level)/2) / sqrt(n).
double ks_one_sided_critical_value(std::size_t n, double level);

struct VarianceEstimate {
  double variance = 0.0;  // unbiased
  double se = 0.0;        // large-sample standard error of the variance
};
VarianceEstimate variance_with_se(const std::vector<double>& values);

// ----- budget allocation ----------------------------------------------------

struct AllocationStrategy {
  unsigned w_n = 1;
  unsigned w_m = 1;
  unsigned w_r = 1;

  std::string label() const;
  // Parses "N:M:R" with positive integer weights; throws UsageError.
  static AllocationStrategy parse(const std::string& text);
  friend bool operator==(const AllocationStrategy&, const AllocationStrategy&) = default;
};

std::vector<AllocationStrategy> default_strategies();

struct RealizedDesign {
  std::optional<SurveyDesign> design;
  std::string warning;  // non-empty when the strategy cannot be realized
};

// s = (budget / (w_n w_m w_r))^(1/3); each dimension max(1, round(w s)).
// If the rounded product exceeds the budget, the dimension rounded up the
// most is decremented until it fits. Skipped (warning set) when some
// dimension's unrounded size w s is below 1/2.
RealizedDesign realize_design(const AllocationStrategy& strategy, std::size_t budget);

struct SweepSettings {
  std::vector<AllocationStrategy> strategies = default_strategies();
  std::vector<std::size_t> budgets{500, 1000, 2000, 5000, 10000};
  std::vector<double> rho_grid{0.1, 0.5};
  std::vector<double> gamma_grid{0.1, 1.0};
  double prior_mean = 0.6;
  double prior_precision = 2.0;
  double beta1 = 0.5;
  std::size_t n_sims = 200;
  double alpha = 0.05;
  std::size_t n_permutations = 1000;
  Seed master_seed = 0;
  PValueRule rule = PValueRule::kPaper;
  unsigned threads = 0;
  Coupling coupling = Coupling::kShared;
};

struct SweepRow {
  std::string strategy;
  std::size_t budget = 0;
  double rho = 0.0;
  double gamma = 0.0;
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double beta1 = 0.0;
  std::size_t n_personas = 0;
  std::size_t n_perturbations = 0;
  std::size_t n_replicates = 0;
  std::size_t realized_budget = 0;
  double power = 0.0;
  double mc_se = 0.0;
  bool skipped = false;
  std::string warning;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

// Long-format table: one row per (rho, gamma, strategy, budget), in that
// nesting order.
std::vector<SweepRow> run_budget_sweep(const SweepSettings& settings);

// ----- resampling protocols for ingested data -------------------------------

// Uniform random partition of {0..m_total-1} into halves of sizes
// floor(m_total/2) and ceil(m_total/2), each returned sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> null_split(std::size_t m_total,
                                                                         Seed seed);

// Builds a ground-truth-null pair from one message: the two halves of a null
// split become messages A and B. With odd M the larger half loses its last
// index so both sides have floor(M/2) perturbations.
PairedResponses null_split_pair(const ResponseTensor& message,
                                const std::vector<std::string>& persona_ids,
                                const std::vector<std::string>& perturbation_ids, Seed seed);

// Uniform without-replacement sample of personas, of perturbation positions
// (the same positions for A and B) and, independently per cell, of
// replicates. Throws DataError if the target exceeds the source.
PairedResponses subsample(const PairedResponses& data, const SurveyDesign& target, Seed seed);

struct SubsampleConfig {
  SurveyDesign target;
  std::size_t n_subsamples = 200;
  double alpha = 0.05;
  std::size_t n_permutations = 10000;
  std::vector<TestMethod> tests{TestMethod::kSign, TestMethod::kPermutation};
  Seed master_seed = 0;
  PValueRule rule = PValueRule::kPaper;
  unsigned threads = 0;
};

// Rejection profile over repeated sub-samples of real data.
RejectionProfile run_subsample_profile(const PairedResponses& data, const SubsampleConfig& config);

}  // namespace gsurvey
