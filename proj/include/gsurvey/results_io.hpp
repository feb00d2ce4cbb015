#pragma once

// CSV serialization of results. Every writer has a matching reader so saved
// results can be reloaded exactly; numbers use shortest round-trip form.
//
//   test results   method,statistic,p_value,alpha,reject,n_permutations,n_effective,degenerate
//   estimates      label,prior_mean,prior_mean_se,prior_precision,prior_precision_se,
//                  gamma,gamma_se,rho,rho_se,alpha0,alpha0_se,beta0,beta0_se,beta1,
//                  sigma2,sigma2_u,n_personas,n_perturbations,n_valid_cells,
//                  bootstrap_resamples,bootstrap_failed,degenerate
//   profile        test,metric,value               (long format)
//   p-values       test,sim,p_value,statistic
//   ECDF           test,x,ecdf
//   sweep          rho,gamma,alpha0,beta0,beta1,strategy,budget,n_personas,
//                  n_perturbations,n_replicates,realized_budget,power,mc_se,skipped,warning

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gsurvey/csv.hpp"
#include "gsurvey/estimation.hpp"
#include "gsurvey/harness.hpp"
#include "gsurvey/hypothesis_tests.hpp"

namespace gsurvey {

CsvTable test_results_table(const std::vector<TestResult>& results);
std::vector<TestResult> test_results_from_table(const CsvTable& table, const std::string& source);

// One estimated model, laid out like a parameter table row: prior mean and
// precision first, then gamma and rho, each followed by its bootstrap SE.
struct EstimateRow {
  std::string label;
  EstimatedParams estimate;
  std::optional<BootstrapResult> bootstrap;
  std::optional<double> beta1_hat;

  friend bool operator==(const EstimateRow&, const EstimateRow&);
};

CsvTable estimates_table(const std::vector<EstimateRow>& rows);
std::vector<EstimateRow> estimates_from_table(const CsvTable& table, const std::string& source);

// Flat "key: value" report; shows "value (se)" pairs when a bootstrap ran.
void write_estimate_report(std::ostream& out, const EstimateRow& row);

CsvTable profile_table(const RejectionProfile& profile);
CsvTable pvalues_table(const RejectionProfile& profile);
// Rebuilds a profile from its summary and per-simulation tables.
RejectionProfile profile_from_tables(const CsvTable& summary, const CsvTable& pvalues,
                                     const std::string& source);

CsvTable ecdf_table(const RejectionProfile& profile, const std::vector<double>& grid);

CsvTable sweep_table(const std::vector<SweepRow>& rows);
std::vector<SweepRow> sweep_from_table(const CsvTable& table, const std::string& source);

// Throws DataError on unwritable paths.
void write_table(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_table(const std::filesystem::path& path);

}  // namespace gsurvey
