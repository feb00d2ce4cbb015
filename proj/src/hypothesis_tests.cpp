#include "gsurvey/hypothesis_tests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "gsurvey/error.hpp"

namespace gsurvey {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
}

TestResult finish(TestMethod method, double statistic, double p, double alpha,
                  std::size_t n_effective) {
  TestResult result;
  result.method = method;
  result.statistic = statistic;
  result.p_value = std::clamp(p, 0.0, 1.0);
  result.alpha = alpha;
  result.reject = result.p_value <= alpha;
  result.n_effective = n_effective;
  return result;
}

TestResult degenerate_result(TestMethod method, double alpha) {
  TestResult result = finish(method, 0.0, 1.0, alpha, 0);
  result.degenerate = true;
  return result;
}

void require_nonempty(const PairedResponses& data) {
  if (data.responses_a.empty() || data.responses_b.empty())
    throw ShapeError("paired responses are empty");
}

// k_j = sum_i (count^A_ij - count^B_ij), so d_j = k_j / (N R) exactly.
std::vector<std::int64_t> perturbation_numerators(const PairedResponses& data) {
  require_nonempty(data);
  const CellCounts a(data.responses_a);
  const CellCounts b(data.responses_b);
  std::vector<std::int64_t> k(a.m, 0);
  for (std::size_t i = 0; i < a.n; ++i)
    for (std::size_t j = 0; j < a.m; ++j) k[j] += a(i, j) - b(i, j);
  return k;
}

template <class V>
V magnitude(V v) {
  return v < V{0} ? -v : v;
}

template <class V>
V signed_sum(std::span<const V> d, std::uint64_t flip_mask) {
  V s{0};
  for (std::size_t j = 0; j < d.size(); ++j) s += ((flip_mask >> j) & 1U) ? -d[j] : d[j];
  return s;
}

// Monte Carlo count of sign vectors with |sum_j s_j d_j| >= |sum_j d_j|.
template <class V>
std::size_t count_extreme_mc(std::span<const V> d, std::size_t n_permutations, Seed seed) {
  const V observed = magnitude(signed_sum<V>(d, 0));
  const std::size_t m = d.size();
  const std::size_t words = (m + 63) / 64;
  Rng rng = make_rng(stream_seed(seed, Stream::kPermutation));
  std::vector<std::uint64_t> bits(words);
  std::size_t count = 0;
  for (std::size_t b = 0; b < n_permutations; ++b) {
    for (auto& w : bits) w = rng();
    V s{0};
    for (std::size_t j = 0; j < m; ++j) s += ((bits[j >> 6] >> (j & 63)) & 1U) ? -d[j] : d[j];
    if (magnitude(s) >= observed) ++count;
  }
  return count;
}

template <class V>
std::size_t count_extreme_exact(std::span<const V> d) {
  const V observed = magnitude(signed_sum<V>(d, 0));
  const std::uint64_t patterns = std::uint64_t{1} << d.size();
  std::size_t count = 0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask)
    if (magnitude(signed_sum<V>(d, mask)) >= observed) ++count;
  return count;
}

double mc_p_value(std::size_t count, std::size_t n_permutations, PValueRule rule) {
  const auto b = static_cast<double>(n_permutations);
  const auto c = static_cast<double>(count);
  return rule == PValueRule::kPaper ? c / b : (1.0 + c) / (b + 1.0);
}

template <class V>
TestResult permutation_core(std::span<const V> d, double statistic, std::size_t n_permutations,
                            double alpha, Seed seed, PValueRule rule) {
  check_alpha(alpha);
  if (d.empty()) throw ShapeError("permutation test needs at least one perturbation");
  if (n_permutations == 0) throw ParameterError("number of permutations must be >= 1");
  const std::size_t count = count_extreme_mc(d, n_permutations, seed);
  TestResult result = finish(TestMethod::kPermutation, statistic,
                             mc_p_value(count, n_permutations, rule), alpha, d.size());
  result.n_permutations = n_permutations;
  return result;
}

template <class V>
TestResult permutation_exact_core(std::span<const V> d, double statistic, double alpha) {
  check_alpha(alpha);
  if (d.empty()) throw ShapeError("permutation test needs at least one perturbation");
  if (d.size() > kExactPermutationLimit)
    throw CapacityError("exact permutation test enumerates 2^M sign vectors and supports M <= " +
                        std::to_string(kExactPermutationLimit) + " (got M = " +
                        std::to_string(d.size()) + "); use the Monte Carlo permutation test");
  const std::size_t count = count_extreme_exact(d);
  const double total = std::ldexp(1.0, static_cast<int>(d.size()));
  TestResult result = finish(TestMethod::kPermutationExact, statistic,
                             static_cast<double>(count) / total, alpha, d.size());
  result.n_permutations = static_cast<std::size_t>(total);
  return result;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double statistic_from_numerators(const std::vector<std::int64_t>& k, const PairedResponses& data) {
  const std::int64_t total = std::accumulate(k.begin(), k.end(), std::int64_t{0});
  return static_cast<double>(total) /
         static_cast<double>(data.n_personas() * data.n_perturbations() * data.n_replicates());
}

}  // namespace

std::string_view to_string(TestMethod method) {
  switch (method) {
    case TestMethod::kSign: return "sign";
    case TestMethod::kWilcoxon: return "wilcoxon";
    case TestMethod::kPermutation: return "permutation";
    case TestMethod::kPermutationExact: return "permutation-exact";
  }
  return "unknown";
}

TestMethod parse_test_method(std::string_view name) {
  for (auto m : {TestMethod::kSign, TestMethod::kWilcoxon, TestMethod::kPermutation,
                 TestMethod::kPermutationExact})
    if (to_string(m) == name) return m;
  throw UsageError("unknown test method '" + std::string(name) +
                   "' (expected sign, wilcoxon, permutation or permutation-exact)");
}

std::string_view to_string(PValueRule rule) {
  return rule == PValueRule::kPaper ? "paper" : "add-one";
}

PValueRule parse_pvalue_rule(std::string_view name) {
  if (name == "paper") return PValueRule::kPaper;
  if (name == "add-one") return PValueRule::kAddOne;
  throw UsageError("unknown p-value correction '" + std::string(name) +
                   "' (expected paper or add-one)");
}

PersonaDifferences persona_differences(const PairedResponses& data) {
  require_nonempty(data);
  const std::size_t n = data.n_personas();
  const std::size_t m = data.n_perturbations();
  const auto per_persona = static_cast<double>(m * data.n_replicates());
  PersonaDifferences out;
  out.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t diff = 0;
    for (std::size_t j = 0; j < m; ++j)
      diff += data.responses_a.cell_sum(i, j) - data.responses_b.cell_sum(i, j);
    out.values[i] = static_cast<double>(diff) / per_persona;
  }
  return out;
}

PerturbationDifferences perturbation_differences(const PairedResponses& data) {
  const auto k = perturbation_numerators(data);
  const auto scale = static_cast<double>(data.n_personas() * data.n_replicates());
  PerturbationDifferences out;
  out.values.reserve(k.size());
  for (auto v : k) out.values.push_back(static_cast<double>(v) / scale);
  return out;
}

double binomial_two_sided_p(std::size_t s, std::size_t n) {
  if (n == 0) return 1.0;
  if (n <= 1000) {
    // Direct recurrence from 2^-n keeps small cases exact.
    std::vector<double> pmf(n + 1);
    pmf[0] = std::ldexp(1.0, -static_cast<int>(n));
    for (std::size_t k = 0; k < n; ++k)
      pmf[k + 1] = pmf[k] * static_cast<double>(n - k) / static_cast<double>(k + 1);
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      if (k <= s) lower += pmf[k];
      if (k >= s) upper += pmf[k];
    }
    return std::min(1.0, 2.0 * std::min(lower, upper));
  }
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  auto pmf = [&](std::size_t k) {
    return std::exp(lg_n1 - std::lgamma(static_cast<double>(k) + 1.0) -
                    std::lgamma(static_cast<double>(n - k) + 1.0) + log_half_n);
  };
  double lower = 0.0;
  for (std::size_t k = 0; k <= s; ++k) lower += pmf(k);
  double upper = 0.0;
  for (std::size_t k = s; k <= n; ++k) upper += pmf(k);
  return std::min(1.0, 2.0 * std::min(lower, upper));
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

TestResult sign_test(const PersonaDifferences& diffs, double alpha) {
  check_alpha(alpha);
  if (diffs.values.empty()) throw ShapeError("sign test needs at least one persona");
  std::size_t positive = 0;
  std::size_t nonzero = 0;
  for (double d : diffs.values) {
    if (d == 0.0) continue;
    ++nonzero;
    if (d > 0.0) ++positive;
  }
  if (nonzero == 0) return degenerate_result(TestMethod::kSign, alpha);
  return finish(TestMethod::kSign, static_cast<double>(positive),
                binomial_two_sided_p(positive, nonzero), alpha, nonzero);
}

TestResult wilcoxon_signed_rank(const PersonaDifferences& diffs, double alpha) {
  check_alpha(alpha);
  if (diffs.values.empty()) throw ShapeError("Wilcoxon test needs at least one persona");

  std::vector<double> nonzero;
  for (double d : diffs.values)
    if (d != 0.0) nonzero.push_back(d);
  const std::size_t n = nonzero.size();
  if (n == 0) return degenerate_result(TestMethod::kWilcoxon, alpha);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(nonzero[x]) < std::fabs(nonzero[y]);
  });

  // Doubled midranks stay integral: a tie block over positions [lo, hi)
  // (1-based ranks lo+1..hi) has doubled midrank lo + hi + 1.
  std::vector<std::int64_t> rank2(n);
  double tie_term = 0.0;  // sum over tie blocks of t^3 - t
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && std::fabs(nonzero[order[hi]]) == std::fabs(nonzero[order[lo]])) ++hi;
    for (std::size_t k = lo; k < hi; ++k) rank2[order[k]] = static_cast<std::int64_t>(lo + hi + 1);
    const auto t = static_cast<double>(hi - lo);
    tie_term += t * t * t - t;
    lo = hi;
  }

  std::int64_t w2 = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (nonzero[k] > 0.0) w2 += rank2[k];
  const double w_plus = static_cast<double>(w2) / 2.0;

  double p;
  if (n <= kWilcoxonExactLimit) {
    // Null distribution of the doubled statistic by subset-sum counting.
    const std::int64_t total = std::accumulate(rank2.begin(), rank2.end(), std::int64_t{0});
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    std::int64_t reach = 0;
    for (auto r : rank2) {
      for (std::int64_t s = reach; s >= 0; --s)
        if (ways[s] != 0.0) ways[s + r] += ways[s];
      reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0;
    double upper = 0.0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (s <= w2) lower += ways[s];
      if (s >= w2) upper += ways[s];
    }
    p = std::min(1.0, 2.0 * std::min(lower, upper) / all);
  } else {
    const auto nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::fabs(w_plus - mean) - 0.5) / std::sqrt(var);
    p = std::min(1.0, 2.0 * normal_sf(z));
  }
  return finish(TestMethod::kWilcoxon, w_plus, p, alpha, n);
}

TestResult permutation_test(const PairedResponses& data, std::size_t n_permutations, double alpha,
                            Seed seed, PValueRule rule) {
  const auto k = perturbation_numerators(data);
  return permutation_core<std::int64_t>(k, statistic_from_numerators(k, data), n_permutations,
                                        alpha, seed, rule);
}

TestResult permutation_test(const PerturbationDifferences& diffs, std::size_t n_permutations,
                            double alpha, Seed seed, PValueRule rule) {
  std::span<const double> d = diffs.values;
  return permutation_core<double>(d, d.empty() ? 0.0 : mean_of(d), n_permutations, alpha, seed,
                                  rule);
}

TestResult permutation_test_exact(const PairedResponses& data, double alpha) {
  const auto k = perturbation_numerators(data);
  return permutation_exact_core<std::int64_t>(k, statistic_from_numerators(k, data), alpha);
}

TestResult permutation_test_exact(const PerturbationDifferences& diffs, double alpha) {
  std::span<const double> d = diffs.values;
  return permutation_exact_core<double>(d, d.empty() ? 0.0 : mean_of(d), alpha);
}

TestResult run_test(TestMethod method, const PairedResponses& data, const TestOptions& options) {
  switch (method) {
    case TestMethod::kSign: return sign_test(persona_differences(data), options.alpha);
    case TestMethod::kWilcoxon:
      return wilcoxon_signed_rank(persona_differences(data), options.alpha);
    case TestMethod::kPermutation:
      return permutation_test(data, options.n_permutations, options.alpha, options.seed,
                              options.rule);
    case TestMethod::kPermutationExact: return permutation_test_exact(data, options.alpha);
  }
  throw UsageError("unknown test method");
}

}  // namespace gsurvey
