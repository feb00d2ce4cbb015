#pragma once

// Three-level persona / perturbation / replicate model for binary survey
// responses.
//
//   p_i          ~ Beta(alpha0, beta0)                      persona baseline
//   u_j          ~ Normal(0, sd = sqrt(rho / gamma))        shared by all personas
//   eps_ij       ~ Normal(0, sd = sqrt((1 - rho) / gamma))  persona-specific
//   logit p^A_ij = logit p_i + u_j + eps_ij
//   logit p^B_ij = logit p_i + beta1 + u_j + eps_ij
//   Y^m_ijr      ~ Bernoulli(p^m_ij),  r = 1..R
//
// By default both messages see the same u_j and eps_ij; only the replicate
// draws are independent between A and B. With Coupling::kIndependent message
// B draws its own u_j and eps_ij, which is the structure of a null split where
// the two arms use disjoint perturbation sets.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsurvey/rng.hpp"

namespace gsurvey {

enum class Coupling { kShared, kIndependent };

std::string_view to_string(Coupling coupling);
// Accepts "shared" and "independent"; throws UsageError otherwise.
Coupling parse_coupling(std::string_view name);

double logit(double p);
double inv_logit(double x);

class GenerativeParams {
 public:
  // Throws ParameterError unless alpha0, beta0, gamma > 0, rho in [0, 1] and
  // beta1 is finite.
  GenerativeParams(double alpha0, double beta0, double gamma, double rho, double beta1 = 0.0);

  double alpha0() const noexcept { return alpha0_; }
  double beta0() const noexcept { return beta0_; }
  double gamma() const noexcept { return gamma_; }
  double rho() const noexcept { return rho_; }
  double beta1() const noexcept { return beta1_; }

  double shared_variance() const noexcept { return rho_ / gamma_; }
  double idiosyncratic_variance() const noexcept { return (1.0 - rho_) / gamma_; }
  double total_variance() const noexcept { return 1.0 / gamma_; }
  double prior_mean() const noexcept { return alpha0_ / (alpha0_ + beta0_); }
  double prior_precision() const noexcept { return alpha0_ + beta0_; }

  GenerativeParams with_beta1(double beta1) const;
  GenerativeParams with_rho(double rho) const;
  GenerativeParams with_gamma(double gamma) const;

  // Shape parameters from prior mean m in (0,1) and precision k > 0.
  static GenerativeParams from_prior(double mean, double precision, double gamma, double rho,
                                     double beta1 = 0.0);

  friend bool operator==(const GenerativeParams&, const GenerativeParams&) = default;

 private:
  double alpha0_;
  double beta0_;
  double gamma_;
  double rho_;
  double beta1_;
};

// Budget triple (N personas, M perturbations, R replicates).
class SurveyDesign {
 public:
  // Throws ParameterError if any dimension is zero or N*M*R overflows.
  SurveyDesign(std::size_t n_personas, std::size_t n_perturbations, std::size_t n_replicates);

  std::size_t n_personas() const noexcept { return n_; }
  std::size_t n_perturbations() const noexcept { return m_; }
  std::size_t n_replicates() const noexcept { return r_; }
  std::size_t budget() const noexcept { return n_ * m_ * r_; }

  friend bool operator==(const SurveyDesign&, const SurveyDesign&) = default;

 private:
  std::size_t n_;
  std::size_t m_;
  std::size_t r_;
};

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct LatentState {
  std::vector<double> persona_prefs;  // p_i
  std::vector<double> shared_effects;  // u_j
  Matrix idiosyncratic_effects;        // eps_ij
  // Message B's own draws under Coupling::kIndependent, empty otherwise.
  std::vector<double> shared_effects_b;
  Matrix idiosyncratic_effects_b;
  Matrix cell_probs_a;                 // p^A_ij
  Matrix cell_probs_b;                 // p^B_ij
  double beta1 = 0.0;
};

// N x M x R binary tensor for one message, stored r-fastest.
class ResponseTensor {
 public:
  ResponseTensor() = default;
  ResponseTensor(std::size_t n, std::size_t m, std::size_t r);

  std::size_t n_personas() const noexcept { return n_; }
  std::size_t n_perturbations() const noexcept { return m_; }
  std::size_t n_replicates() const noexcept { return r_; }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t& at(std::size_t i, std::size_t j, std::size_t r) { return data_[(i * m_ + j) * r_ + r]; }
  std::uint8_t at(std::size_t i, std::size_t j, std::size_t r) const {
    return data_[(i * m_ + j) * r_ + r];
  }

  // Number of 1s among the R replicates of cell (i, j).
  std::int64_t cell_sum(std::size_t i, std::size_t j) const;
  std::span<const std::uint8_t> raw() const noexcept { return data_; }

  friend bool operator==(const ResponseTensor&, const ResponseTensor&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t r_ = 0;
  std::vector<std::uint8_t> data_;
};

// Integer cell totals of a tensor: counts(i, j) = sum_r Y_ijr.
struct CellCounts {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t r = 0;
  std::vector<std::int64_t> counts;

  explicit CellCounts(const ResponseTensor& tensor);
  // Throws ShapeError if counts.size() != n*m or any count lies outside [0, r].
  CellCounts(std::size_t n, std::size_t m, std::size_t r, std::vector<std::int64_t> counts);

  std::int64_t operator()(std::size_t i, std::size_t j) const { return counts[i * m + j]; }
};

// Paired tensors for messages A and B plus provenance labels. Both tensors
// have the same N, M and R; perturbation j of A is paired with perturbation j
// of B.
struct PairedResponses {
  ResponseTensor responses_a;
  ResponseTensor responses_b;
  std::vector<std::string> persona_ids;
  std::vector<std::string> perturbation_ids_a;
  std::vector<std::string> perturbation_ids_b;

  PairedResponses() = default;
  // Throws ShapeError on mismatched or empty tensors. Missing labels are
  // filled with decimal indices.
  PairedResponses(ResponseTensor a, ResponseTensor b, std::vector<std::string> personas = {},
                  std::vector<std::string> perturbations_a = {},
                  std::vector<std::string> perturbations_b = {});

  std::size_t n_personas() const noexcept { return responses_a.n_personas(); }
  std::size_t n_perturbations() const noexcept { return responses_a.n_perturbations(); }
  std::size_t n_replicates() const noexcept { return responses_a.n_replicates(); }

  // Same data with the message labels exchanged.
  PairedResponses swapped() const;

  friend bool operator==(const PairedResponses&, const PairedResponses&) = default;
};

std::vector<double> sample_persona_preferences(const GenerativeParams& params, std::size_t n,
                                               Seed seed);

LatentState sample_latent_state(const GenerativeParams& params, const SurveyDesign& design,
                                Seed seed, Coupling coupling = Coupling::kShared);

// Throws ShapeError if the state was not sampled for `design`.
PairedResponses sample_responses(const LatentState& state, const SurveyDesign& design, Seed seed);

PairedResponses simulate_survey(const GenerativeParams& params, const SurveyDesign& design,
                                Seed seed, Coupling coupling = Coupling::kShared);

}  // namespace gsurvey
