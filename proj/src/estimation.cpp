#include "gsurvey/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "gsurvey/error.hpp"
#include "gsurvey/nelder_mead.hpp"
#include "gsurvey/parallel.hpp"

namespace gsurvey {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sample_mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased (n-1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  // Centre on the first value so constant input gives exactly zero.
  const double shift = v.front();
  double mean = 0.0;
  for (double x : v) mean += x - shift;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - shift - mean) * (x - shift - mean);
  return ss / static_cast<double>(v.size() - 1);
}

bool interior(double p) { return p > 0.0 && p < 1.0; }

EstimatedParams degenerate_estimate(const CellCounts& counts, std::size_t n_valid) {
  EstimatedParams out;
  out.alpha0_hat = out.beta0_hat = out.gamma_hat = out.rho_hat = kNaN;
  out.prior_mean = out.prior_precision = out.sigma2_hat = out.sigma2_u_hat = kNaN;
  out.n_valid_cells = n_valid;
  out.n_personas = counts.n;
  out.n_perturbations = counts.m;
  out.degenerate = true;
  return out;
}

}  // namespace

std::vector<double> persona_base_rates(const CellCounts& counts) {
  std::vector<double> rates(counts.n);
  const auto per_persona = static_cast<double>(counts.m * counts.r);
  for (std::size_t i = 0; i < counts.n; ++i) {
    std::int64_t total = 0;
    for (std::size_t j = 0; j < counts.m; ++j) total += counts(i, j);
    rates[i] = static_cast<double>(total) / per_persona;
  }
  return rates;
}

std::vector<double> persona_base_rates(const ResponseTensor& tensor) {
  if (tensor.empty()) throw ShapeError("response tensor is empty");
  return persona_base_rates(CellCounts(tensor));
}

double beta_clamp_epsilon(std::size_t n_perturbations, std::size_t n_replicates) {
  return 0.5 / (static_cast<double>(n_perturbations * n_replicates) + 1.0);
}

BetaShape beta_method_of_moments(std::span<const double> values) {
  const double m = sample_mean(values);
  const double v = sample_variance(values);
  double precision = (v > 0.0) ? m * (1.0 - m) / v - 1.0 : 0.0;
  if (!(precision > 0.0)) precision = 2.0;
  return {m * precision, (1.0 - m) * precision};
}

double beta_negative_log_likelihood(std::span<const double> values, double alpha, double beta) {
  double sum_log = 0.0;
  double sum_log1m = 0.0;
  for (double x : values) {
    sum_log += std::log(x);
    sum_log1m += std::log1p(-x);
  }
  const double log_beta_fn = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  return static_cast<double>(values.size()) * log_beta_fn - (alpha - 1.0) * sum_log -
         (beta - 1.0) * sum_log1m;
}

BetaFit fit_beta_mle(std::span<const double> rates, double clamp_eps) {
  BetaFit fit;
  std::vector<double> x(rates.begin(), rates.end());
  for (auto& v : x) v = std::clamp(v, clamp_eps, 1.0 - clamp_eps);
  if (x.size() < 3 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    fit.alpha0 = fit.beta0 = fit.negative_log_likelihood = kNaN;
    fit.degenerate = true;
    return fit;
  }

  // The likelihood only needs the two sufficient statistics.
  double sum_log = 0.0;
  double sum_log1m = 0.0;
  for (double v : x) {
    sum_log += std::log(v);
    sum_log1m += std::log1p(-v);
  }
  const auto n = static_cast<double>(x.size());
  auto objective = [&](std::span<const double> theta) {
    const double a = std::exp(theta[0]);
    const double b = std::exp(theta[1]);
    return n * (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) - (a - 1.0) * sum_log -
           (b - 1.0) * sum_log1m;
  };

  const BetaShape start = beta_method_of_moments(x);
  const auto opt = nelder_mead(objective, {std::log(start.alpha), std::log(start.beta)});
  fit.alpha0 = std::exp(opt.x[0]);
  fit.beta0 = std::exp(opt.x[1]);
  fit.negative_log_likelihood = opt.value;
  fit.iterations = opt.iterations;
  fit.converged = opt.converged;
  return fit;
}

std::size_t ResidualTable::n_valid() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

ResidualTable logit_residuals(const CellCounts& counts) {
  ResidualTable table;
  table.persona_rates = persona_base_rates(counts);
  table.residuals = Matrix(counts.n, counts.m);
  table.cell_rates = Matrix(counts.n, counts.m);
  table.valid.assign(counts.n * counts.m, 0);
  const auto r = static_cast<double>(counts.r);
  for (std::size_t i = 0; i < counts.n; ++i) {
    const double persona = table.persona_rates[i];
    for (std::size_t j = 0; j < counts.m; ++j) {
      const double cell = static_cast<double>(counts(i, j)) / r;
      table.cell_rates(i, j) = cell;
      if (interior(persona) && interior(cell)) {
        table.residuals(i, j) = logit(cell) - logit(persona);
        table.valid[i * counts.m + j] = 1;
      }
    }
  }
  return table;
}

ResidualTable logit_residuals(const ResponseTensor& tensor) {
  if (tensor.empty()) throw ShapeError("response tensor is empty");
  return logit_residuals(CellCounts(tensor));
}

VarianceComponents estimate_variance_components(const ResidualTable& table) {
  VarianceComponents vc;
  const std::size_t n = table.n_personas();
  const std::size_t m = table.n_perturbations();

  std::vector<double> all;
  std::vector<double> column_means;
  for (std::size_t j = 0; j < m; ++j) {
    double sum = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!table.is_valid(i, j)) continue;
      all.push_back(table.residuals(i, j));
      sum += table.residuals(i, j);
      ++cells;
    }
    if (cells > 0) column_means.push_back(sum / static_cast<double>(cells));
  }
  vc.n_valid_cells = all.size();
  vc.n_perturbations_used = column_means.size();
  if (vc.n_valid_cells < 2 || vc.n_perturbations_used < 2) {
    vc.degenerate = true;
    return vc;
  }

  vc.cells_per_perturbation =
      static_cast<double>(vc.n_valid_cells) / static_cast<double>(vc.n_perturbations_used);
  vc.sigma2 = sample_variance(all);
  if (!(vc.sigma2 > 0.0) || !(vc.cells_per_perturbation > 1.0)) {
    vc.degenerate = true;
    return vc;
  }

  const double nbar = vc.cells_per_perturbation;
  const double raw = (nbar * sample_variance(column_means) - vc.sigma2) / (nbar - 1.0);
  vc.sigma2_u = std::clamp(raw, 0.0, vc.sigma2);
  vc.gamma = 1.0 / vc.sigma2;
  vc.rho = vc.sigma2_u / vc.sigma2;
  return vc;
}

EstimatedParams estimate_params(const CellCounts& counts) {
  const auto rates = persona_base_rates(counts);
  const BetaFit fit = fit_beta_mle(rates, beta_clamp_epsilon(counts.m, counts.r));
  const VarianceComponents vc = estimate_variance_components(logit_residuals(counts));
  if (fit.degenerate || vc.degenerate) return degenerate_estimate(counts, vc.n_valid_cells);

  EstimatedParams out;
  out.alpha0_hat = fit.alpha0;
  out.beta0_hat = fit.beta0;
  out.prior_mean = fit.alpha0 / (fit.alpha0 + fit.beta0);
  out.prior_precision = fit.alpha0 + fit.beta0;
  out.gamma_hat = vc.gamma;
  out.rho_hat = vc.rho;
  out.sigma2_hat = vc.sigma2;
  out.sigma2_u_hat = vc.sigma2_u;
  out.n_valid_cells = vc.n_valid_cells;
  out.n_personas = counts.n;
  out.n_perturbations = counts.m;
  out.beta_converged = fit.converged;
  return out;
}

EstimatedParams estimate_params(const ResponseTensor& tensor) {
  if (tensor.empty()) throw ShapeError("response tensor is empty");
  return estimate_params(CellCounts(tensor));
}

ResponseTensor pool_perturbations(const PairedResponses& data) {
  const std::size_t n = data.n_personas();
  const std::size_t m = data.n_perturbations();
  const std::size_t r = data.n_replicates();
  ResponseTensor pooled(n, 2 * m, r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < r; ++k) {
        pooled.at(i, j, k) = data.responses_a.at(i, j, k);
        pooled.at(i, m + j, k) = data.responses_b.at(i, j, k);
      }
  return pooled;
}

EstimatedParams estimate_params(const PairedResponses& null_split) {
  return estimate_params(pool_perturbations(null_split));
}

BootstrapResult bootstrap_standard_errors(const CellCounts& counts, std::size_t n_resamples,
                                          Seed seed, unsigned threads,
                                          const CountsEstimator& estimator) {
  if (n_resamples == 0) throw ParameterError("number of bootstrap resamples must be >= 1");
  const CountsEstimator& run =
      estimator ? estimator : CountsEstimator([](const CellCounts& c) { return estimate_params(c); });

  const std::size_t n = counts.n;
  const std::size_t m = counts.m;
  const Seed base = stream_seed(seed, Stream::kBootstrap);
  std::vector<std::optional<EstimatedParams>> draws(n_resamples);

  parallel_for(n_resamples, threads, [&](std::size_t b) {
    Rng rng = make_rng(substream_seed(base, b));
    std::uniform_int_distribution<std::size_t> pick_persona(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_perturbation(0, m - 1);
    std::vector<std::size_t> rows(n);
    std::vector<std::size_t> cols(m);
    for (auto& i : rows) i = pick_persona(rng);
    for (auto& j : cols) j = pick_perturbation(rng);
    std::vector<std::int64_t> resampled(n * m);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t c = 0; c < m; ++c) resampled[a * m + c] = counts(rows[a], cols[c]);
    EstimatedParams est = run(CellCounts(n, m, counts.r, std::move(resampled)));
    if (!est.degenerate) draws[b] = est;
  });

  BootstrapResult result;
  result.n_resamples = n_resamples;
  std::vector<EstimatedParams> ok;
  for (auto& d : draws) {
    if (d) ok.push_back(*d);
    else ++result.n_failed;
  }
  if (2 * result.n_failed > n_resamples)
    throw ReliabilityError("bootstrap unreliable: " + std::to_string(result.n_failed) + " of " +
                           std::to_string(n_resamples) + " resamples were degenerate");

  auto sd = [&](double EstimatedParams::*field) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const auto& e : ok) v.push_back(e.*field);
    return std::sqrt(sample_variance(v));
  };
  result.se_alpha0 = sd(&EstimatedParams::alpha0_hat);
  result.se_beta0 = sd(&EstimatedParams::beta0_hat);
  result.se_gamma = sd(&EstimatedParams::gamma_hat);
  result.se_rho = sd(&EstimatedParams::rho_hat);
  result.se_prior_mean = sd(&EstimatedParams::prior_mean);
  result.se_prior_precision = sd(&EstimatedParams::prior_precision);
  return result;
}

EffectSize estimate_effect_size(const PairedResponses& data) {
  if (data.responses_a.empty()) throw ShapeError("paired responses are empty");
  const CellCounts a(data.responses_a);
  const CellCounts b(data.responses_b);
  const auto r = static_cast<double>(a.r);
  EffectSize out;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.m; ++j) {
      const double pa = static_cast<double>(a(i, j)) / r;
      const double pb = static_cast<double>(b(i, j)) / r;
      if (!interior(pa) || !interior(pb)) continue;
      sum += logit(pb) - logit(pa);
      ++out.n_valid_cells;
    }
  if (out.n_valid_cells == 0) {
    out.beta1_hat = kNaN;
    out.degenerate = true;
    return out;
  }
  out.beta1_hat = sum / static_cast<double>(out.n_valid_cells);
  return out;
}

}  // namespace gsurvey
