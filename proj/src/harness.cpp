#include "gsurvey/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gsurvey/error.hpp"
#include "gsurvey/parallel.hpp"

namespace gsurvey {

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

RejectionProfile run_simulated_profile(const ExperimentConfig& config) {
  config.validate();
  const TestOptions base{config.alpha, config.n_permutations, 0, config.rule};
  std::vector<std::vector<TestResult>> results(config.n_sims);
  parallel_for(config.n_sims, config.threads, [&](std::size_t s) {
    const Seed seed = substream_seed(config.master_seed, s);
    const PairedResponses data = simulate_survey(config.params, config.design, seed, config.coupling);
    TestOptions options = base;
    options.seed = seed;
    auto& row = results[s];
    row.reserve(config.tests.size());
    for (TestMethod method : config.tests) row.push_back(run_test(method, data, options));
  });
  return summarize(results, config.tests, config.alpha);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_sims == 0) throw ParameterError("n_sims must be >= 1");
  if (tests.empty()) throw ParameterError("at least one test must be selected");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (n_permutations == 0) throw ParameterError("n_permutations must be >= 1");
}

const TestProfile& RejectionProfile::at(TestMethod method) const {
  for (const auto& t : tests)
    if (t.method == method) return t;
  throw DataError("profile has no results for test '" + std::string(to_string(method)) + "'");
}

RejectionProfile summarize(const std::vector<std::vector<TestResult>>& per_sim_results,
                           const std::vector<TestMethod>& tests, double alpha) {
  RejectionProfile profile;
  profile.alpha = alpha;
  profile.n_sims = per_sim_results.size();
  for (std::size_t t = 0; t < tests.size(); ++t) {
    TestProfile tp;
    tp.method = tests[t];
    std::size_t rejections = 0;
    for (const auto& row : per_sim_results) {
      const TestResult& r = row.at(t);
      tp.p_values.push_back(r.p_value);
      tp.statistics.push_back(r.statistic);
      if (r.p_value <= alpha) ++rejections;
      if (r.degenerate) ++tp.n_degenerate;
    }
    const auto n = static_cast<double>(profile.n_sims);
    if (profile.n_sims > 0) {
      tp.rejection_rate = static_cast<double>(rejections) / n;
      tp.mc_se = std::sqrt(tp.rejection_rate * (1.0 - tp.rejection_rate) / n);
    }
    profile.tests.push_back(std::move(tp));
  }
  return profile;
}

RejectionProfile run_validity_profile(const ExperimentConfig& config) {
  if (config.params.beta1() != 0.0)
    throw ParameterError("validity profiles simulate H0 and require beta1 = 0");
  return run_simulated_profile(config);
}

RejectionProfile run_power_profile(const ExperimentConfig& config) {
  return run_simulated_profile(config);
}

std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) throw ParameterError("an ECDF grid needs at least two points");
  std::vector<double> grid(points);
  for (std::size_t k = 0; k < points; ++k)
    grid[k] = static_cast<double>(k) / static_cast<double>(points - 1);
  return grid;
}

std::vector<double> ecdf_on_grid(const std::vector<double>& values,
                                 const std::vector<double>& grid) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(grid.size());
  const auto n = static_cast<double>(sorted.size());
  for (double x : grid) {
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
    out.push_back(sorted.empty() ? 0.0 : static_cast<double>(below) / n);
  }
  return out;
}

std::vector<double> median_curve(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) return {};
  const std::size_t len = curves.front().size();
  for (const auto& c : curves)
    if (c.size() != len) throw ShapeError("curves must share one grid");
  std::vector<double> out(len);
  std::vector<double> column(curves.size());
  for (std::size_t k = 0; k < len; ++k) {
    for (std::size_t c = 0; c < curves.size(); ++c) column[c] = curves[c][k];
    std::sort(column.begin(), column.end());
    const std::size_t mid = column.size() / 2;
    out[k] = column.size() % 2 == 1 ? column[mid] : 0.5 * (column[mid - 1] + column[mid]);
  }
  return out;
}

KsStatistic ks_uniform(std::vector<double> values) {
  KsStatistic ks;
  if (values.empty()) return ks;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double x = std::clamp(values[k], 0.0, 1.0);
    ks.d_plus = std::max(ks.d_plus, static_cast<double>(k + 1) / n - x);
    ks.d_minus = std::max(ks.d_minus, x - static_cast<double>(k) / n);
  }
  ks.d = std::max(ks.d_plus, ks.d_minus);
  return ks;
}

double ks_critical_value(std::size_t n, double level) {
  return std::sqrt(-0.5 * std::log(level / 2.0)) / std::sqrt(static_cast<double>(n));
}

double ks_one_sided_critical_value(std::size_t n, double level) {
  return std::sqrt(-0.5 * std::log(level)) / std::sqrt(static_cast<double>(n));
}

VarianceEstimate variance_with_se(const std::vector<double>& values) {
  VarianceEstimate out;
  const std::size_t n = values.size();
  if (n < 4) return out;
  const auto nd = static_cast<double>(n);
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / nd;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d2 = (v - mean) * (v - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  out.variance = m2 / (nd - 1.0);
  m4 /= nd;
  const double s4 = out.variance * out.variance;
  out.se = std::sqrt(std::max(0.0, (m4 - s4 * (nd - 3.0) / (nd - 1.0)) / nd));
  return out;
}

std::string AllocationStrategy::label() const {
  return std::to_string(w_n) + ":" + std::to_string(w_m) + ":" + std::to_string(w_r);
}

AllocationStrategy AllocationStrategy::parse(const std::string& text) {
  std::istringstream in(text);
  AllocationStrategy s;
  char c1 = 0;
  char c2 = 0;
  long n = 0;
  long m = 0;
  long r = 0;
  if (!(in >> n >> c1 >> m >> c2 >> r) || c1 != ':' || c2 != ':' || n <= 0 || m <= 0 || r <= 0 ||
      !(in >> std::ws).eof())
    throw UsageError("allocation strategy must look like N:M:R with positive integers, got '" +
                     text + "'");
  s.w_n = static_cast<unsigned>(n);
  s.w_m = static_cast<unsigned>(m);
  s.w_r = static_cast<unsigned>(r);
  return s;
}

std::vector<AllocationStrategy> default_strategies() {
  return {{1, 1, 1}, {10, 1, 1}, {1, 10, 1}, {1, 1, 10},
          {5, 5, 1}, {5, 1, 5},  {1, 5, 5},  {2, 10, 1}};
}

RealizedDesign realize_design(const AllocationStrategy& strategy, std::size_t budget) {
  RealizedDesign out;
  if (budget == 0) {
    out.warning = "budget must be positive";
    return out;
  }
  const double weights[3] = {static_cast<double>(strategy.w_n), static_cast<double>(strategy.w_m),
                             static_cast<double>(strategy.w_r)};
  const double scale = std::cbrt(static_cast<double>(budget) / (weights[0] * weights[1] * weights[2]));
  double target[3];
  std::size_t dims[3];
  for (int k = 0; k < 3; ++k) {
    target[k] = weights[k] * scale;
    if (target[k] < 0.5) {
      out.warning = "budget " + std::to_string(budget) + " too small for strategy " +
                    strategy.label() + ": a dimension would round to zero";
      return out;
    }
    dims[k] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target[k])));
  }
  while (dims[0] * dims[1] * dims[2] > budget) {
    int pick = -1;
    double worst = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (dims[k] <= 1) continue;
      const double over = static_cast<double>(dims[k]) / target[k];
      if (pick < 0 || over > worst) {
        pick = k;
        worst = over;
      }
    }
    if (pick < 0) break;
    --dims[pick];
  }
  out.design = SurveyDesign(dims[0], dims[1], dims[2]);
  return out;
}

std::vector<SweepRow> run_budget_sweep(const SweepSettings& settings) {
  if (settings.strategies.empty() || settings.budgets.empty() || settings.rho_grid.empty() ||
      settings.gamma_grid.empty())
    throw ParameterError("budget sweep needs strategies, budgets and a parameter grid");

  std::vector<SweepRow> rows;
  std::uint64_t config_index = 0;
  for (double rho : settings.rho_grid) {
    for (double gamma : settings.gamma_grid) {
      const auto params = GenerativeParams::from_prior(settings.prior_mean, settings.prior_precision,
                                                       gamma, rho, settings.beta1);
      for (const auto& strategy : settings.strategies) {
        for (std::size_t budget : settings.budgets) {
          SweepRow row;
          row.strategy = strategy.label();
          row.budget = budget;
          row.rho = rho;
          row.gamma = gamma;
          row.alpha0 = params.alpha0();
          row.beta0 = params.beta0();
          row.beta1 = params.beta1();
          const Seed seed = substream_seed(settings.master_seed, config_index++);

          const RealizedDesign realized = realize_design(strategy, budget);
          if (!realized.design) {
            row.skipped = true;
            row.warning = realized.warning;
            rows.push_back(std::move(row));
            continue;
          }
          const SurveyDesign& design = *realized.design;
          row.n_personas = design.n_personas();
          row.n_perturbations = design.n_perturbations();
          row.n_replicates = design.n_replicates();
          row.realized_budget = design.budget();

          ExperimentConfig config(params, design);
          config.n_sims = settings.n_sims;
          config.alpha = settings.alpha;
          config.n_permutations = settings.n_permutations;
          config.tests = {TestMethod::kPermutation};
          config.master_seed = seed;
          config.rule = settings.rule;
          config.threads = settings.threads;
          config.coupling = settings.coupling;
          const RejectionProfile profile = run_power_profile(config);
          const TestProfile& power = profile.tests.front();
          row.power = power.rejection_rate;
          row.mc_se = power.mc_se;
          rows.push_back(std::move(row));
        }
      }
    }
  }
  return rows;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> null_split(std::size_t m_total,
                                                                         Seed seed) {
  if (m_total < 2) throw DataError("null split needs at least two perturbations");
  Rng rng = make_rng(stream_seed(seed, Stream::kSplit));
  const auto order = shuffled_indices(m_total, rng);
  const std::size_t half = m_total / 2;
  std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {std::move(first), std::move(second)};
}

PairedResponses null_split_pair(const ResponseTensor& message,
                                const std::vector<std::string>& persona_ids,
                                const std::vector<std::string>& perturbation_ids, Seed seed) {
  const std::size_t m = message.n_perturbations();
  if (!perturbation_ids.empty() && perturbation_ids.size() != m)
    throw ShapeError("perturbation label count does not match M");
  auto [first, second] = null_split(m, seed);
  second.resize(first.size());

  const std::size_t n = message.n_personas();
  const std::size_t r = message.n_replicates();
  const std::size_t half = first.size();
  ResponseTensor a(n, half, r);
  ResponseTensor b(n, half, r);
  std::vector<std::string> ids_a;
  std::vector<std::string> ids_b;
  for (std::size_t j = 0; j < half; ++j) {
    ids_a.push_back(perturbation_ids.empty() ? std::to_string(first[j]) : perturbation_ids[first[j]]);
    ids_b.push_back(perturbation_ids.empty() ? std::to_string(second[j])
                                             : perturbation_ids[second[j]]);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < r; ++k) {
        a.at(i, j, k) = message.at(i, first[j], k);
        b.at(i, j, k) = message.at(i, second[j], k);
      }
  }
  return PairedResponses(std::move(a), std::move(b), persona_ids, std::move(ids_a),
                         std::move(ids_b));
}

PairedResponses subsample(const PairedResponses& data, const SurveyDesign& target, Seed seed) {
  const std::size_t n = target.n_personas();
  const std::size_t m = target.n_perturbations();
  const std::size_t r = target.n_replicates();
  if (n > data.n_personas() || m > data.n_perturbations() || r > data.n_replicates())
    throw DataError("subsample target " + std::to_string(n) + "x" + std::to_string(m) + "x" +
                    std::to_string(r) + " exceeds the source " + std::to_string(data.n_personas()) +
                    "x" + std::to_string(data.n_perturbations()) + "x" +
                    std::to_string(data.n_replicates()));

  Rng rng = make_rng(stream_seed(seed, Stream::kSubsample));
  const auto personas = shuffled_indices(data.n_personas(), rng);
  const auto perturbations = shuffled_indices(data.n_perturbations(), rng);
  std::vector<std::size_t> replicates(data.n_replicates());
  std::iota(replicates.begin(), replicates.end(), 0);

  ResponseTensor a(n, m, r);
  ResponseTensor b(n, m, r);
  std::vector<std::string> persona_ids;
  std::vector<std::string> ids_a;
  std::vector<std::string> ids_b;
  for (std::size_t i = 0; i < n; ++i) persona_ids.push_back(data.persona_ids[personas[i]]);
  for (std::size_t j = 0; j < m; ++j) {
    ids_a.push_back(data.perturbation_ids_a[perturbations[j]]);
    ids_b.push_back(data.perturbation_ids_b[perturbations[j]]);
  }
  // Partial Fisher-Yates: the first r entries become a uniform r-subset.
  auto pick_replicates = [&] {
    for (std::size_t k = 0; k < r; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, replicates.size() - 1);
      std::swap(replicates[k], replicates[pick(rng)]);
    }
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      pick_replicates();
      for (std::size_t k = 0; k < r; ++k)
        a.at(i, j, k) = data.responses_a.at(personas[i], perturbations[j], replicates[k]);
      pick_replicates();
      for (std::size_t k = 0; k < r; ++k)
        b.at(i, j, k) = data.responses_b.at(personas[i], perturbations[j], replicates[k]);
    }
  return PairedResponses(std::move(a), std::move(b), std::move(persona_ids), std::move(ids_a),
                         std::move(ids_b));
}

RejectionProfile run_subsample_profile(const PairedResponses& data, const SubsampleConfig& config) {
  if (config.n_subsamples == 0) throw ParameterError("n_subsamples must be >= 1");
  if (config.tests.empty()) throw ParameterError("at least one test must be selected");
  const TestOptions base{config.alpha, config.n_permutations, 0, config.rule};
  std::vector<std::vector<TestResult>> results(config.n_subsamples);
  parallel_for(config.n_subsamples, config.threads, [&](std::size_t s) {
    const Seed seed = substream_seed(config.master_seed, s);
    const PairedResponses sub = subsample(data, config.target, seed);
    TestOptions options = base;
    options.seed = seed;
    for (TestMethod method : config.tests) results[s].push_back(run_test(method, sub, options));
  });
  return summarize(results, config.tests, config.alpha);
}

}  // namespace gsurvey
