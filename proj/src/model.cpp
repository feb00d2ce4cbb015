#include "gsurvey/model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "gsurvey/error.hpp"

namespace gsurvey {

namespace {

// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::string> index_labels(std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(std::to_string(k));
  return out;
}

}  // namespace

std::string_view to_string(Coupling coupling) {
  return coupling == Coupling::kShared ? "shared" : "independent";
}

Coupling parse_coupling(std::string_view name) {
  if (name == "shared") return Coupling::kShared;
  if (name == "independent") return Coupling::kIndependent;
  throw UsageError("unknown coupling '" + std::string(name) + "' (expected shared or independent)");
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

GenerativeParams::GenerativeParams(double alpha0, double beta0, double gamma, double rho,
                                   double beta1)
    : alpha0_(alpha0), beta0_(beta0), gamma_(gamma), rho_(rho), beta1_(beta1) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0))
    throw ParameterError("alpha0 must be a positive finite number");
  if (!(beta0 > 0.0) || !std::isfinite(beta0))
    throw ParameterError("beta0 must be a positive finite number");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ParameterError("gamma must be a positive finite number");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
  if (!std::isfinite(beta1)) throw ParameterError("beta1 must be finite");
}

GenerativeParams GenerativeParams::with_beta1(double beta1) const {
  return {alpha0_, beta0_, gamma_, rho_, beta1};
}
GenerativeParams GenerativeParams::with_rho(double rho) const {
  return {alpha0_, beta0_, gamma_, rho, beta1_};
}
GenerativeParams GenerativeParams::with_gamma(double gamma) const {
  return {alpha0_, beta0_, gamma, rho_, beta1_};
}

GenerativeParams GenerativeParams::from_prior(double mean, double precision, double gamma,
                                              double rho, double beta1) {
  if (!(mean > 0.0 && mean < 1.0)) throw ParameterError("prior mean must lie in (0, 1)");
  if (!(precision > 0.0)) throw ParameterError("prior precision must be positive");
  return {mean * precision, (1.0 - mean) * precision, gamma, rho, beta1};
}

SurveyDesign::SurveyDesign(std::size_t n_personas, std::size_t n_perturbations,
                           std::size_t n_replicates)
    : n_(n_personas), m_(n_perturbations), r_(n_replicates) {
  if (n_ == 0 || m_ == 0 || r_ == 0)
    throw ParameterError("survey design dimensions N, M, R must all be >= 1");
  constexpr auto kMax = static_cast<std::size_t>(std::numeric_limits<std::int64_t>::max());
  if (n_ > kMax / m_ || n_ * m_ > kMax / r_)
    throw ParameterError("survey budget N*M*R overflows");
}

ResponseTensor::ResponseTensor(std::size_t n, std::size_t m, std::size_t r)
    : n_(n), m_(m), r_(r), data_(n * m * r, 0) {}

std::int64_t ResponseTensor::cell_sum(std::size_t i, std::size_t j) const {
  std::int64_t s = 0;
  const std::uint8_t* cell = data_.data() + (i * m_ + j) * r_;
  for (std::size_t r = 0; r < r_; ++r) s += cell[r];
  return s;
}

CellCounts::CellCounts(const ResponseTensor& tensor)
    : n(tensor.n_personas()), m(tensor.n_perturbations()), r(tensor.n_replicates()),
      counts(n * m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) counts[i * m + j] = tensor.cell_sum(i, j);
}

CellCounts::CellCounts(std::size_t n_, std::size_t m_, std::size_t r_,
                       std::vector<std::int64_t> counts_)
    : n(n_), m(m_), r(r_), counts(std::move(counts_)) {
  if (n == 0 || m == 0 || r == 0 || counts.size() != n * m)
    throw ShapeError("cell count table must be a non-empty N x M matrix");
  for (auto c : counts)
    if (c < 0 || c > static_cast<std::int64_t>(r))
      throw ShapeError("cell count outside [0, R]");
}

PairedResponses::PairedResponses(ResponseTensor a, ResponseTensor b,
                                 std::vector<std::string> personas,
                                 std::vector<std::string> perturbations_a,
                                 std::vector<std::string> perturbations_b)
    : responses_a(std::move(a)), responses_b(std::move(b)), persona_ids(std::move(personas)),
      perturbation_ids_a(std::move(perturbations_a)),
      perturbation_ids_b(std::move(perturbations_b)) {
  if (responses_a.empty() || responses_b.empty())
    throw ShapeError("paired responses need a non-empty tensor for each message");
  if (responses_a.n_personas() != responses_b.n_personas() ||
      responses_a.n_perturbations() != responses_b.n_perturbations() ||
      responses_a.n_replicates() != responses_b.n_replicates())
    throw ShapeError("message A and B tensors must have identical N x M x R shape");
  if (persona_ids.empty()) persona_ids = index_labels(n_personas());
  if (perturbation_ids_a.empty()) perturbation_ids_a = index_labels(n_perturbations());
  if (perturbation_ids_b.empty()) perturbation_ids_b = index_labels(n_perturbations());
  if (persona_ids.size() != n_personas())
    throw ShapeError("persona label count does not match N");
  if (perturbation_ids_a.size() != n_perturbations() ||
      perturbation_ids_b.size() != n_perturbations())
    throw ShapeError("perturbation label count does not match M");
}

PairedResponses PairedResponses::swapped() const {
  return PairedResponses(responses_b, responses_a, persona_ids, perturbation_ids_b,
                         perturbation_ids_a);
}

std::vector<double> sample_persona_preferences(const GenerativeParams& params, std::size_t n,
                                               Seed seed) {
  if (n == 0) throw ParameterError("number of personas must be >= 1");
  Rng rng = make_rng(seed);
  std::gamma_distribution<double> ga(params.alpha0(), 1.0);
  std::gamma_distribution<double> gb(params.beta0(), 1.0);
  std::vector<double> prefs;
  prefs.reserve(n);
  while (prefs.size() < n) {
    double x = ga(rng);
    double y = gb(rng);
    double p = x / (x + y);
    // Logit must stay finite: redraw exact 0 or 1 (and 0/0 from double underflow).
    if (p > 0.0 && p < 1.0) prefs.push_back(p);
  }
  return prefs;
}

namespace {

void draw_effects(const GenerativeParams& params, std::size_t n, std::size_t m, Seed seed,
                  std::vector<double>& shared, Matrix& own) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  const double shared_sd = std::sqrt(params.shared_variance());
  const double own_sd = std::sqrt(params.idiosyncratic_variance());
  shared.resize(m);
  for (auto& u : shared) u = shared_sd * z(rng);
  own = Matrix(n, m);
  for (double& eps : own.values) eps = own_sd * z(rng);
}

}  // namespace

LatentState sample_latent_state(const GenerativeParams& params, const SurveyDesign& design,
                                Seed seed, Coupling coupling) {
  const std::size_t n = design.n_personas();
  const std::size_t m = design.n_perturbations();

  LatentState state;
  state.beta1 = params.beta1();
  state.persona_prefs = sample_persona_preferences(params, n, stream_seed(seed, Stream::kPersona));
  draw_effects(params, n, m, stream_seed(seed, Stream::kLatent), state.shared_effects,
               state.idiosyncratic_effects);
  if (coupling == Coupling::kIndependent)
    draw_effects(params, n, m, stream_seed(seed, Stream::kLatentB), state.shared_effects_b,
                 state.idiosyncratic_effects_b);
  const bool own_b = coupling == Coupling::kIndependent;
  const auto& u_b = own_b ? state.shared_effects_b : state.shared_effects;
  const auto& eps_b = own_b ? state.idiosyncratic_effects_b : state.idiosyncratic_effects;

  state.cell_probs_a = Matrix(n, m);
  state.cell_probs_b = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double base = logit(state.persona_prefs[i]);
    for (std::size_t j = 0; j < m; ++j) {
      state.cell_probs_a(i, j) = inv_logit(base + state.shared_effects[j] + state.idiosyncratic_effects(i, j));
      state.cell_probs_b(i, j) = inv_logit(base + params.beta1() + u_b[j] + eps_b(i, j));
    }
  }
  return state;
}

PairedResponses sample_responses(const LatentState& state, const SurveyDesign& design, Seed seed) {
  const std::size_t n = design.n_personas();
  const std::size_t m = design.n_perturbations();
  const std::size_t r = design.n_replicates();
  if (state.cell_probs_a.rows != n || state.cell_probs_a.cols != m ||
      state.cell_probs_b.rows != n || state.cell_probs_b.cols != m)
    throw ShapeError("latent state dimensions do not match the survey design");

  Rng rng = make_rng(seed);
  ResponseTensor a(n, m, r);
  ResponseTensor b(n, m, r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double pa = state.cell_probs_a(i, j);
      const double pb = state.cell_probs_b(i, j);
      for (std::size_t k = 0; k < r; ++k) a.at(i, j, k) = uniform01(rng) < pa ? 1 : 0;
      for (std::size_t k = 0; k < r; ++k) b.at(i, j, k) = uniform01(rng) < pb ? 1 : 0;
    }
  }
  return PairedResponses(std::move(a), std::move(b));
}

PairedResponses simulate_survey(const GenerativeParams& params, const SurveyDesign& design,
                                Seed seed, Coupling coupling) {
  LatentState state = sample_latent_state(params, design, seed, coupling);
  return sample_responses(state, design, stream_seed(seed, Stream::kResponses));
}

}  // namespace gsurvey
