#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>

#include "gsurvey/error.hpp"
#include "gsurvey/hypothesis_tests.hpp"
#include "gsurvey/model.hpp"

using namespace gsurvey;

namespace {

// Paired data whose persona-0 cells in message A carry `extra[j]` yes answers
// more than message B; everything else is zero.
PairedResponses with_perturbation_excess(std::size_t n, std::size_t r, const std::vector<int>& extra) {
  const std::size_t m = extra.size();
  ResponseTensor a(n, m, r), b(n, m, r);
  for (std::size_t j = 0; j < m; ++j) {
    const int e = extra[j];
    for (int k = 0; k < std::abs(e); ++k) {
      auto& target = e > 0 ? a : b;
      target.at(static_cast<std::size_t>(k) / r, j, static_cast<std::size_t>(k) % r) = 1;
    }
  }
  return PairedResponses(a, b);
}

PairedResponses random_pair(std::mt19937_64& rng, std::size_t n, std::size_t m, std::size_t r) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ResponseTensor a(n, m, r), b(n, m, r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double pa = u(rng), pb = u(rng);
      for (std::size_t k = 0; k < r; ++k) {
        a.at(i, j, k) = u(rng) < pa;
        b.at(i, j, k) = u(rng) < pb;
      }
    }
  return PairedResponses(a, b);
}

// Brute-force two-sided exact Wilcoxon p-value with midranks.
double wilcoxon_oracle(const std::vector<double>& d) {
  std::vector<double> nz;
  for (double x : d)
    if (x != 0) nz.push_back(x);
  const std::size_t n = nz.size();
  std::vector<double> rank(n);
  for (std::size_t a = 0; a < n; ++a) {
    double less = 0, equal = 0;
    for (std::size_t b = 0; b < n; ++b) {
      if (std::fabs(nz[b]) < std::fabs(nz[a])) ++less;
      if (std::fabs(nz[b]) == std::fabs(nz[a])) ++equal;
    }
    rank[a] = less + (equal + 1) / 2;
  }
  double w = 0;
  for (std::size_t a = 0; a < n; ++a)
    if (nz[a] > 0) w += rank[a];
  double lo = 0, hi = 0;
  const std::size_t all = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < all; ++mask) {
    double s = 0;
    for (std::size_t a = 0; a < n; ++a)
      if (mask >> a & 1) s += rank[a];
    if (s <= w + 1e-9) ++lo;
    if (s >= w - 1e-9) ++hi;
  }
  return std::min(1.0, 2 * std::min(lo, hi) / static_cast<double>(all));
}

// Brute-force exact sign-flip p-value on integer numerators.
double flip_oracle(const std::vector<long>& k) {
  long t = 0;
  for (long x : k) t += x;
  const std::size_t m = k.size();
  std::size_t count = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    long s = 0;
    for (std::size_t j = 0; j < m; ++j) s += (mask >> j & 1) ? -k[j] : k[j];
    if (std::labs(s) >= std::labs(t)) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(std::size_t{1} << m);
}

}  // namespace

TEST_CASE("method names") {
  for (auto m : {TestMethod::kSign, TestMethod::kWilcoxon, TestMethod::kPermutation,
                 TestMethod::kPermutationExact})
    CHECK(parse_test_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_test_method("t-test"), UsageError);
  CHECK(parse_pvalue_rule("add-one") == PValueRule::kAddOne);
  CHECK(parse_pvalue_rule("paper") == PValueRule::kPaper);
  CHECK_THROWS_AS(parse_pvalue_rule("exact"), UsageError);
}

TEST_CASE("persona differences") {
  SUBCASE("A all ones, B all zeros") {
    ResponseTensor a(3, 2, 2), b(3, 2, 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t r = 0; r < 2; ++r) a.at(i, j, r) = 1;
    for (double d : persona_differences(PairedResponses(a, b)).values) CHECK(d == 1.0);
    for (double d : persona_differences(PairedResponses(a, a)).values) CHECK(d == 0.0);
  }
  SUBCASE("hand example N=1, M=2, R=2") {
    ResponseTensor a(1, 2, 2), b(1, 2, 2);
    a.at(0, 0, 0) = a.at(0, 0, 1) = 1;  // cell means (1.0, 0.5)
    a.at(0, 1, 0) = 1;
    b.at(0, 1, 1) = 1;  // cell means (0.0, 0.5)
    CHECK(persona_differences(PairedResponses(a, b)).values == std::vector<double>{0.5});
  }
}

TEST_CASE("perturbation differences") {
  ResponseTensor a(2, 1, 1), b(2, 1, 1);
  a.at(0, 0, 0) = a.at(1, 0, 0) = 1;
  b.at(1, 0, 0) = 1;
  CHECK(perturbation_differences(PairedResponses(a, b)).values == std::vector<double>{0.5});
  CHECK(perturbation_differences(PairedResponses(a, a)).values == std::vector<double>{0.0});

  std::mt19937_64 rng(5);
  const auto p = random_pair(rng, 7, 5, 3);
  double mean_d = 0, mean_D = 0;
  for (double x : perturbation_differences(p).values) mean_d += x / 5;
  for (double x : persona_differences(p).values) mean_D += x / 7;
  CHECK(mean_d == doctest::Approx(mean_D).epsilon(1e-12));
}

TEST_CASE("sign test") {
  auto r = sign_test({{0.1, 0.2, 0.3}}, 0.05);
  CHECK(r.statistic == 3);
  CHECK(r.p_value == 0.25);
  CHECK(!r.reject);

  r = sign_test({{0.5, -0.5}}, 0.05);
  CHECK(r.statistic == 1);
  CHECK(r.p_value == 1.0);

  r = sign_test({{0.0, 0.0, 0.2}}, 0.05);
  CHECK(r.n_effective == 1);
  CHECK(r.statistic == 1);
  CHECK(r.p_value == 1.0);

  r = sign_test({{0.0, 0.0}}, 0.05);
  CHECK(r.degenerate);
  CHECK(r.p_value == 1.0);

  // Reference values from an exact binomial test (scipy.stats.binomtest).
  CHECK(binomial_two_sided_p(3, 17) == doctest::Approx(0.012725830078125).epsilon(1e-12));
  CHECK(binomial_two_sided_p(12, 40) == doctest::Approx(0.01658900337497471).epsilon(1e-12));
  CHECK(binomial_two_sided_p(20, 40) == 1.0);
  CHECK(binomial_two_sided_p(0, 10) == doctest::Approx(2.0 / 1024).epsilon(1e-12));

  std::vector<double> many(30, 0.1);
  many[0] = -0.1;
  CHECK(sign_test({many}, 0.05).reject);
  CHECK_THROWS_AS(sign_test({{0.1}}, 1.5), ParameterError);
}

TEST_CASE("Wilcoxon signed-rank") {
  auto r = wilcoxon_signed_rank({{0.1, 0.2, 0.3}}, 0.05);
  CHECK(r.statistic == 6);
  CHECK(r.p_value == 0.25);

  r = wilcoxon_signed_rank({{0.3, -0.3}}, 0.05);
  CHECK(r.statistic == 1.5);
  CHECK(r.p_value == 1.0);

  r = wilcoxon_signed_rank({{0.0}}, 0.05);
  CHECK(r.degenerate);
  CHECK(r.p_value == 1.0);

  SUBCASE("exact distribution matches enumeration, with ties") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> v(-4, 4);
    for (int rep = 0; rep < 60; ++rep) {
      std::vector<double> d(1 + rep % 12);
      for (double& x : d) x = v(rng) / 8.0;
      CHECK(wilcoxon_signed_rank({d}, 0.05).p_value == doctest::Approx(wilcoxon_oracle(d)).epsilon(1e-12));
    }
  }

  SUBCASE("normal approximation above the exact limit") {
    // Reference from scipy.stats.wilcoxon(correction=True, method="approx").
    std::vector<double> d;
    for (int k = 0; k < 30; ++k) d.push_back((k % 7 - 3) / 10.0 + (k % 5 == 0 ? 0.05 : 0.0));
    r = wilcoxon_signed_rank({d}, 0.05);
    CHECK(r.n_effective == 27);
    CHECK(r.statistic == 182.0);
    CHECK(r.p_value == doctest::Approx(0.875143103069832).epsilon(1e-9));
  }
}

TEST_CASE("Monte Carlo permutation test") {
  SUBCASE("all differences zero") {
    const auto r = permutation_test(PerturbationDifferences{{0, 0, 0}}, 200, 0.05, 1);
    CHECK(r.statistic == 0);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("single perturbation") {
    const auto r = permutation_test(PerturbationDifferences{{0.3}}, 200, 0.05, 1);
    CHECK(r.p_value == 1.0);
  }
  SUBCASE("d = (0.2, 0.4)") {
    const auto r = permutation_test(with_perturbation_excess(5, 1, {1, 2}), 20000, 0.05, 3);
    CHECK(r.statistic == doctest::Approx(0.3));
    CHECK(std::abs(r.p_value - 0.5) < 4 * std::sqrt(0.25 / 20000));
    CHECK(r.n_permutations == 20000u);
  }
  SUBCASE("p-value rules") {
    const auto data = with_perturbation_excess(4, 2, {3, 2, 4, 1, 2, 3});
    const auto paper = permutation_test(data, 999, 0.05, 9, PValueRule::kPaper);
    const auto add_one = permutation_test(data, 999, 0.05, 9, PValueRule::kAddOne);
    const double count = paper.p_value * 999;
    CHECK(count == doctest::Approx(std::round(count)));
    CHECK(add_one.p_value == doctest::Approx((count + 1) / 1000));
    CHECK(add_one.p_value > 0.0);
  }
  SUBCASE("seeded runs repeat") {
    std::mt19937_64 rng(8);
    const auto data = random_pair(rng, 6, 8, 3);
    CHECK(permutation_test(data, 500, 0.05, 42) == permutation_test(data, 500, 0.05, 42));
  }
  SUBCASE("agrees with exact enumeration") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 10; ++rep) {
      const auto data = random_pair(rng, 4, 3 + rep % 6, 2);
      const double exact = permutation_test_exact(data, 0.05).p_value;
      const double mc = permutation_test(data, 20000, 0.05, rep).p_value;
      CHECK(std::abs(mc - exact) <= 4 * std::sqrt(exact * (1 - exact) / 20000) + 1.0 / 20000);
    }
  }
  CHECK_THROWS_AS(permutation_test(PerturbationDifferences{{0.1}}, 0, 0.05, 1), ParameterError);
}

TEST_CASE("exact permutation test") {
  CHECK(permutation_test_exact(PerturbationDifferences{{0.2, 0.4}}, 0.05).p_value == 0.5);
  CHECK(permutation_test_exact(with_perturbation_excess(5, 1, {1, 2}), 0.05).p_value == 0.5);
  for (std::size_t m = 1; m <= 8; ++m) {
    const auto r = permutation_test_exact(with_perturbation_excess(3, 1, std::vector<int>(m, 2)), 0.05);
    CHECK(r.p_value == std::ldexp(1.0, 1 - static_cast<int>(m)));
  }
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> v(-3, 3);
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<int> extra(1 + rep % 10);
    std::vector<long> k;
    for (int& e : extra) {
      e = v(rng);
      k.push_back(e);
    }
    const auto r = permutation_test_exact(with_perturbation_excess(3, 1, extra), 0.05);
    CHECK(r.p_value == flip_oracle(k));
    CHECK(r.p_value >= std::ldexp(2.0, -static_cast<int>(extra.size())));
  }
  CHECK_THROWS_AS(permutation_test_exact(PerturbationDifferences{std::vector<double>(21, 0.1)}, 0.05),
                  CapacityError);
}

TEST_CASE("label swap antisymmetry") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const auto data = random_pair(rng, 3 + rep % 5, 2 + rep % 7, 1 + rep % 3);
    const auto swapped = data.swapped();
    const auto D = persona_differences(data).values;
    const auto Ds = persona_differences(swapped).values;
    for (std::size_t i = 0; i < D.size(); ++i) CHECK(Ds[i] == -D[i]);
    const auto d = perturbation_differences(data).values;
    const auto ds = perturbation_differences(swapped).values;
    for (std::size_t j = 0; j < d.size(); ++j) CHECK(ds[j] == -d[j]);
    for (auto method : {TestMethod::kSign, TestMethod::kWilcoxon, TestMethod::kPermutation,
                        TestMethod::kPermutationExact}) {
      TestOptions o;
      o.n_permutations = 300;
      o.seed = static_cast<Seed>(rep);
      CHECK(run_test(method, data, o).p_value == run_test(method, swapped, o).p_value);
    }
    TestOptions o;
    CHECK(run_test(TestMethod::kPermutation, swapped, o).statistic ==
          -run_test(TestMethod::kPermutation, data, o).statistic);
  }
}
