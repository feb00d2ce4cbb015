#pragma once

// Hybrid maximum-likelihood / method-of-moments estimator for
// (alpha0, beta0, gamma, rho), run on one message's responses:
//
//   1. persona base rates     p_i  = mean over perturbations and replicates
//   2. Beta(alpha0, beta0)    maximum likelihood over {p_i}, Nelder-Mead
//   3. logit residuals        r_ij = logit(p_ij) - logit(p_i)
//   4. total variance         sigma2 = Var(r_ij) over valid cells, gamma = 1/sigma2
//   5. shared variance        sigma2_u = (N Var(rbar_.j) - sigma2) / (N - 1),
//                             clamped to [0, sigma2]; rho = sigma2_u / sigma2
//
// Replicate-level binomial noise is not removed from sigma2, so gamma is
// attenuated (biased low) when R is small.
//
// Also here: the persona x perturbation bootstrap for standard errors and an
// effect-size estimator for beta1.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "gsurvey/model.hpp"
#include "gsurvey/rng.hpp"

namespace gsurvey {

std::vector<double> persona_base_rates(const CellCounts& counts);
std::vector<double> persona_base_rates(const ResponseTensor& tensor);

// Half-count clamp applied to base rates before the Beta likelihood.
double beta_clamp_epsilon(std::size_t n_perturbations, std::size_t n_replicates);

struct BetaShape {
  double alpha = 0.0;
  double beta = 0.0;
};

// Closed-form moment match using the (n-1) sample variance. Falls back to a
// precision of 2 when the sample variance is too large for a Beta.
BetaShape beta_method_of_moments(std::span<const double> values);

double beta_negative_log_likelihood(std::span<const double> values, double alpha, double beta);

struct BetaFit {
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double negative_log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // Fewer than three rates, or every clamped rate identical.
  bool degenerate = false;
};

// Rates are clamped to [clamp_eps, 1 - clamp_eps]; optimisation runs over
// (log alpha, log beta) from the method-of-moments start.
BetaFit fit_beta_mle(std::span<const double> rates, double clamp_eps);

struct ResidualTable {
  Matrix residuals;                // r_ij, meaningful only where valid
  std::vector<std::uint8_t> valid;  // N x M mask, row-major
  std::vector<double> persona_rates;
  Matrix cell_rates;

  std::size_t n_personas() const noexcept { return residuals.rows; }
  std::size_t n_perturbations() const noexcept { return residuals.cols; }
  bool is_valid(std::size_t i, std::size_t j) const { return valid[i * residuals.cols + j] != 0; }
  std::size_t n_valid() const;
};

// A cell is valid when both its rate and its persona's rate lie strictly
// inside (0, 1).
ResidualTable logit_residuals(const CellCounts& counts);
ResidualTable logit_residuals(const ResponseTensor& tensor);

struct VarianceComponents {
  double gamma = 0.0;
  double rho = 0.0;
  double sigma2 = 0.0;
  double sigma2_u = 0.0;
  std::size_t n_valid_cells = 0;
  std::size_t n_perturbations_used = 0;
  // Average valid cells per perturbation; plays the role of N in the
  // bias correction and equals N on complete data.
  double cells_per_perturbation = 0.0;
  bool degenerate = false;
};

VarianceComponents estimate_variance_components(const ResidualTable& table);

struct EstimatedParams {
  double alpha0_hat = 0.0;
  double beta0_hat = 0.0;
  double gamma_hat = 0.0;
  double rho_hat = 0.0;
  double prior_mean = 0.0;
  double prior_precision = 0.0;
  double sigma2_hat = 0.0;
  double sigma2_u_hat = 0.0;
  std::size_t n_valid_cells = 0;
  std::size_t n_personas = 0;
  std::size_t n_perturbations = 0;
  bool beta_converged = false;
  // Numeric fields are NaN when set.
  bool degenerate = false;

  friend bool operator==(const EstimatedParams&, const EstimatedParams&) = default;
};

EstimatedParams estimate_params(const CellCounts& counts);
EstimatedParams estimate_params(const ResponseTensor& tensor);
// Null-condition data: both halves come from one message, so their
// perturbations are pooled into a single N x 2M table first.
EstimatedParams estimate_params(const PairedResponses& null_split);

ResponseTensor pool_perturbations(const PairedResponses& data);

struct BootstrapResult {
  double se_alpha0 = 0.0;
  double se_beta0 = 0.0;
  double se_gamma = 0.0;
  double se_rho = 0.0;
  double se_prior_mean = 0.0;
  double se_prior_precision = 0.0;
  std::size_t n_resamples = 0;
  std::size_t n_failed = 0;

  friend bool operator==(const BootstrapResult&, const BootstrapResult&) = default;
};

using CountsEstimator = std::function<EstimatedParams(const CellCounts&)>;

// Each resample draws N persona indices and M perturbation indices with
// replacement and re-runs `estimator` on the resampled cell table. Degenerate
// resamples count as failures and are left out of the standard deviations.
// Throws ReliabilityError when more than half the resamples fail.
BootstrapResult bootstrap_standard_errors(const CellCounts& counts, std::size_t n_resamples,
                                          Seed seed, unsigned threads = 0,
                                          const CountsEstimator& estimator = {});

struct EffectSize {
  double beta1_hat = 0.0;
  std::size_t n_valid_cells = 0;
  bool degenerate = false;
};

// Mean over cells valid in both messages of logit(p^B_ij) - logit(p^A_ij).
// Positive values mean message B draws more "yes" responses.
EffectSize estimate_effect_size(const PairedResponses& data);

}  // namespace gsurvey
