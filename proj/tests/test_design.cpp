#include "bernrand/design.hpp"
#include "bernrand/error.hpp"

#include "oracles.hpp"
#include "table1.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bernrand;

namespace {

template <class Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a bernrand::Error";
  return ErrorCode::InvalidArgument;
}

std::vector<double> random_propensities(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::vector<double> e(n);
  for (auto& x : e)
    x = u(gen);
  return e;
}

PropensityDesign table1_design() { return PropensityDesign(table1::propensity); }

} // namespace

TEST(Assignment, ParsesAndPrints) {
  const Assignment a = Assignment::from_string("0110");
  EXPECT_EQ(a.size(), 4u);
  EXPECT_EQ(a.treated_count(), 2u);
  EXPECT_EQ(a.to_string(), "0110");
  EXPECT_EQ(a[1], 1);
  EXPECT_EQ(error_code_of([] { (void)Assignment::from_string("01x"); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([] { Assignment(std::vector<std::uint8_t>{0, 2}); }),
            ErrorCode::InvalidArgument);
}

TEST(PropensityDesign, RejectsBoundaryPropensities) {
  for (double bad : {0.0, 1.0, -0.1, 1.5, std::nan("")})
    EXPECT_EQ(error_code_of([bad] { PropensityDesign({0.5, bad}); }),
              ErrorCode::InvalidArgument)
        << bad;
  EXPECT_EQ(error_code_of([] { PropensityDesign(std::vector<double>{}); }),
            ErrorCode::InvalidArgument);
}

TEST(PropensityDesign, CovariateRowsMustMatch) {
  CovariateTable cov;
  cov.add_column("x", {1.0, 2.0, 1.0});
  EXPECT_EQ(error_code_of([&] { PropensityDesign({0.5, 0.5}, cov); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(error_code_of([&] { cov.add_column("x", {1.0, 2.0, 3.0}); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([&] { cov.add_column("z", {1.0}); }),
            ErrorCode::LengthMismatch);
}

TEST(PropensityDesign, KernelIsProductOfCoins) {
  const PropensityDesign d({0.2, 0.5, 0.8});
  const auto w = Assignment::from_string("101");
  EXPECT_DOUBLE_EQ(d.kernel(w.bits()), 0.2 * 0.5 * 0.8);
  EXPECT_NEAR(d.log_kernel(w.bits()), std::log(0.2 * 0.5 * 0.8), 1e-14);
}

TEST(CovariateMatch, NumericAndCategorical) {
  EXPECT_TRUE(covariate_matches(CovariateValue{1.0}, "1"));
  EXPECT_TRUE(covariate_matches(CovariateValue{1.0}, "1.0"));
  EXPECT_FALSE(covariate_matches(CovariateValue{1.0}, "2"));
  EXPECT_FALSE(covariate_matches(CovariateValue{1.0}, "one"));
  EXPECT_TRUE(covariate_matches(CovariateValue{std::string("a")}, "a"));
  EXPECT_FALSE(covariate_matches(CovariateValue{std::string("a")}, "b"));
}

TEST(SupportSpec, FixedTotalBounds) {
  EXPECT_NO_THROW(SupportSpec::fixed_total(1).validate(10));
  EXPECT_NO_THROW(SupportSpec::fixed_total(9).validate(10));
  EXPECT_EQ(error_code_of([] { SupportSpec::fixed_total(0).validate(10); }),
            ErrorCode::OutOfRange);
  EXPECT_EQ(error_code_of([] { SupportSpec::fixed_total(10).validate(10); }),
            ErrorCode::OutOfRange);
}

TEST(ObservedStudy, LengthsMustAgree) {
  const PropensityDesign d({0.5, 0.5, 0.5});
  EXPECT_EQ(error_code_of([&] { ObservedStudy(d, Assignment::from_string("01"), {1, 2, 3}); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(error_code_of([&] { ObservedStudy(d, Assignment::from_string("011"), {1, 2}); }),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(error_code_of(
                [&] { ObservedStudy(d, Assignment::from_string("011"), {1, 2, NAN}); }),
            ErrorCode::InvalidArgument);
}

// ---- assignment probabilities --------------------------------------------------

TEST(AssignmentProbability, EqualPropensityClosedForms) {
  const PropensityDesign d(std::vector<double>(10, 0.5));
  const auto w = Assignment::from_string("0110100110");
  EXPECT_NEAR(assignment_probability(d, w, SupportSpec::full()), 1.0 / 1024, 1e-15);
  EXPECT_NEAR(assignment_probability(d, w, SupportSpec::nondegenerate()), 1.0 / 1022,
              1e-15);
  EXPECT_NEAR(assignment_probability(d, w, SupportSpec::fixed_total(5)), 1.0 / 252, 1e-15);
  EXPECT_EQ(assignment_probability(d, w, SupportSpec::fixed_total(4)), 0.0);
  EXPECT_EQ(assignment_probability(d, Assignment(std::vector<std::uint8_t>(10, 0)),
                                   SupportSpec::nondegenerate()),
            0.0);
}

TEST(AssignmentProbability, WorkedExampleFixedTotalMatchesEnumeration) {
  const auto d = table1_design();
  const Assignment w(table1::w_obs);
  double denominator = 0.0;
  for (std::uint64_t c = 0; c < 1024; ++c) {
    const auto v = oracle::bits_of(c, 10);
    if (oracle::ones(v) == 6)
      denominator += oracle::kernel(table1::propensity, v);
  }
  const double expected =
      oracle::kernel(table1::propensity, table1::w_obs) / denominator;
  EXPECT_NEAR(assignment_probability(d, w, SupportSpec::fixed_total(6)), expected,
              1e-15);
}

TEST(AssignmentProbability, LengthMismatch) {
  EXPECT_EQ(error_code_of([] {
              (void)assignment_probability(table1_design(), Assignment::from_string("01"),
                                           SupportSpec::full());
            }),
            ErrorCode::LengthMismatch);
}

TEST(AssignmentProbability, CriterionTooLargeDirectsToSamplers) {
  const PropensityDesign d(std::vector<double>(30, 0.5));
  const Assignment w(std::vector<std::uint8_t>(30, 1));
  try {
    (void)assignment_probability(d, w, SupportSpec::criterion(AcceptanceCriterion::fixed_total(15)));
    FAIL() << "expected TooLargeToEnumerate";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLargeToEnumerate);
    EXPECT_NE(std::string(e.what()).find("sampling"), std::string::npos);
  }
}

TEST(AssignmentProbability, LogPathForManyUnits) {
  std::vector<double> e(80, 0.5);
  const PropensityDesign d(e);
  const Assignment w(std::vector<std::uint8_t>(80, 1));
  EXPECT_NEAR(std::log(assignment_probability(d, w, SupportSpec::full())),
              80 * std::log(0.5), 1e-9);
  EXPECT_NEAR(assignment_probability(d, w, SupportSpec::nondegenerate()), 0.0, 1e-300);
}

TEST(AssignmentProbability, SumsToOneOverEverySupport) {
  std::mt19937_64 gen(1);
  for (std::size_t n : {2u, 5u, 9u, 12u}) {
    const PropensityDesign d(random_propensities(gen, n));
    std::vector<SupportSpec> supports{SupportSpec::full(), SupportSpec::nondegenerate(),
                                      SupportSpec::fixed_total(1),
                                      SupportSpec::fixed_total(n - 1)};
    AcceptanceCriterion odd;
    odd.require("first-treated", [](Bits w, const CovariateTable*) { return w[0] == 1; });
    supports.push_back(SupportSpec::criterion(odd));
    for (const auto& s : supports) {
      double total = 0.0;
      for (const auto& w : enumerate_support(d, s))
        total += assignment_probability(d, w, s);
      EXPECT_NEAR(total, 1.0, 1e-10) << s.name() << " n=" << n;
    }
  }
}

TEST(AssignmentProbability, NondegenerateIsRenormalizedKernel) {
  std::mt19937_64 gen(2);
  const auto e = random_propensities(gen, 12);
  const PropensityDesign d(e);
  double p1 = 1.0, p0 = 1.0;
  for (double x : e) {
    p1 *= x;
    p0 *= 1.0 - x;
  }
  for (const auto& w : enumerate_support(d, SupportSpec::nondegenerate())) {
    const std::vector<std::uint8_t> v(w.bits().begin(), w.bits().end());
    ASSERT_NEAR(assignment_probability(d, w, SupportSpec::nondegenerate()),
                oracle::kernel(e, v) / (1.0 - p1 - p0), 1e-15);
  }
}

TEST(AssignmentProbability, EqualPropensityFixedTotalIsUniform) {
  for (double e : {0.2, 0.5, 0.7}) {
    for (std::size_t n : {6u, 12u}) {
      const PropensityDesign d(std::vector<double>(n, e));
      const std::size_t k = n / 3;
      const double expected = 1.0 / binomial_coefficient(n, k);
      for (const auto& w : enumerate_support(d, SupportSpec::fixed_total(k)))
        ASSERT_NEAR(assignment_probability(d, w, SupportSpec::fixed_total(k)), expected,
                    1e-14);
    }
  }
}

TEST(AssignmentProbability, SupportEquivalencesWithCriteria) {
  std::mt19937_64 gen(3);
  const PropensityDesign d(random_propensities(gen, 8));
  const auto nd = SupportSpec::criterion(AcceptanceCriterion::nondegenerate());
  const auto ft = SupportSpec::criterion(AcceptanceCriterion::fixed_total(3));
  for (const auto& w : enumerate_support(d, SupportSpec::full())) {
    EXPECT_NEAR(assignment_probability(d, w, nd),
                assignment_probability(d, w, SupportSpec::nondegenerate()), 1e-15);
    EXPECT_NEAR(assignment_probability(d, w, ft),
                assignment_probability(d, w, SupportSpec::fixed_total(3)), 1e-15);
  }
}

TEST(AssignmentProbability, UnsatisfiableCriterion) {
  const PropensityDesign d({0.5, 0.5, 0.5});
  AcceptanceCriterion never;
  never.require("never", [](Bits, const CovariateTable*) { return false; });
  EXPECT_EQ(error_code_of([&] {
              (void)assignment_probability(d, Assignment::from_string("010"),
                                           SupportSpec::criterion(never));
            }),
            ErrorCode::Unsatisfiable);
}

// ---- enumeration ----------------------------------------------------------------

TEST(EnumerateSupport, WorkedExampleCounts) {
  const auto d = table1_design();
  EXPECT_EQ(enumerate_support(d, SupportSpec::nondegenerate()).size(), 1022u);
  EXPECT_EQ(enumerate_support(d, SupportSpec::fixed_total(6)).size(), 210u);
  EXPECT_EQ(enumerate_support(d, SupportSpec::full()).size(), 1024u);
}

TEST(EnumerateSupport, TwoUnitsFullInLexicographicOrder) {
  const auto all = enumerate_support(PropensityDesign({0.3, 0.6}), SupportSpec::full());
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].to_string(), "00");
  EXPECT_EQ(all[1].to_string(), "01");
  EXPECT_EQ(all[2].to_string(), "10");
  EXPECT_EQ(all[3].to_string(), "11");
}

TEST(EnumerateSupport, MatchesBruteForceOrderAndMembership) {
  const PropensityDesign d(std::vector<double>(9, 0.4));
  const auto listed = enumerate_support(d, SupportSpec::fixed_total(4));
  std::vector<std::string> expected;
  for (std::uint64_t c = 0; c < 512; ++c) {
    const auto v = oracle::bits_of(c, 9);
    if (oracle::ones(v) == 4)
      expected.push_back(bits_to_string(v));
  }
  ASSERT_EQ(listed.size(), expected.size());
  for (std::size_t i = 0; i < listed.size(); ++i)
    EXPECT_EQ(listed[i].to_string(), expected[i]);
}

TEST(EnumerateSupport, LimitIsEnforced) {
  const PropensityDesign d(std::vector<double>(12, 0.5));
  EXPECT_EQ(error_code_of([&] { (void)enumerate_support(d, SupportSpec::full(), 4095); }),
            ErrorCode::TooLargeToEnumerate);
  EXPECT_EQ(enumerate_support(d, SupportSpec::full(), 4096).size(), 4096u);
  // C(12, 6) = 924 candidates for the fixed total.
  EXPECT_EQ(enumerate_support(d, SupportSpec::fixed_total(6), 924).size(), 924u);
  EXPECT_EQ(enumeration_cost(100, SupportSpec::full()), UINT64_MAX);
}

// ---- Poisson-binomial ---------------------------------------------------------------

TEST(PoissonBinomial, TwoFairCoins) {
  const std::vector<double> e{0.5, 0.5};
  EXPECT_DOUBLE_EQ(poisson_binomial_pmf(e, 1), 0.5);
  EXPECT_DOUBLE_EQ(poisson_binomial_pmf(e, 0), 0.25);
}

TEST(PoissonBinomial, WorkedExampleMatchesSubsetSum) {
  EXPECT_NEAR(poisson_binomial_pmf(table1::propensity, 6), oracle::pmf(table1::propensity, 6),
              1e-12);
}

TEST(PoissonBinomial, RandomVectorsMatchBruteForce) {
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 1 + rep % 13;
    const auto e = random_propensities(gen, n);
    const auto dist = poisson_binomial_distribution(e);
    ASSERT_EQ(dist.size(), n + 1);
    double total = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      EXPECT_NEAR(dist[k], oracle::pmf(e, k), 1e-12);
      EXPECT_NEAR(poisson_binomial_pmf(e, k), dist[k], 1e-15);
      total += dist[k];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(PoissonBinomial, KOutOfRange) {
  EXPECT_EQ(error_code_of([] { (void)poisson_binomial_pmf(std::vector<double>{0.5}, 2); }),
            ErrorCode::OutOfRange);
}

// ---- total probability estimator -----------------------------------------------------------

TEST(EstimateTotalProbability, ConstantKernelIsExact) {
  const PropensityDesign d(std::vector<double>(10, 0.5));
  const auto r = estimate_total_probability(d, 4, 50, RngStream(1));
  EXPECT_NEAR(r.estimate, binomial_coefficient(10, 4) / 1024.0, 1e-15);
  EXPECT_NEAR(r.standard_error, 0.0, 1e-15);
}

TEST(EstimateTotalProbability, WorkedExampleWithinFourSe) {
  const auto r = estimate_total_probability(table1_design(), 6, 100000, RngStream(2));
  const double exact = poisson_binomial_pmf(table1::propensity, 6);
  EXPECT_LT(std::fabs(r.estimate - exact), 4.0 * r.standard_error);
}

TEST(EstimateTotalProbability, ThreeUnitsHandEnumeration) {
  const PropensityDesign d({0.2, 0.5, 0.8});
  const double exact = 0.2 * 0.5 * 0.2 + 0.2 * 0.5 * 0.8 + 0.8 * 0.5 * 0.8;
  const auto r = estimate_total_probability(d, 2, 100000, RngStream(3));
  EXPECT_LT(std::fabs(r.estimate - exact), 4.0 * r.standard_error);
}

TEST(EstimateTotalProbability, UnbiasedOverRepeatedRuns) {
  const auto d = table1_design();
  const double exact = poisson_binomial_pmf(table1::propensity, 6);
  const int runs = 200;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    const double est = estimate_total_probability(d, 6, 1000, RngStream(10, r)).estimate;
    sum += est;
    sum_sq += est * est;
  }
  const double mean = sum / runs;
  const double sd = std::sqrt((sum_sq - runs * mean * mean) / (runs - 1));
  EXPECT_LT(std::fabs(mean - exact), 4.0 * sd / std::sqrt(runs));
}

TEST(EstimateTotalProbability, Preconditions) {
  const auto d = table1_design();
  EXPECT_EQ(error_code_of([&] { (void)estimate_total_probability(d, 6, 0, RngStream(1)); }),
            ErrorCode::InvalidArgument);
  EXPECT_EQ(error_code_of([&] { (void)estimate_total_probability(d, 0, 10, RngStream(1)); }),
            ErrorCode::OutOfRange);
  EXPECT_TRUE(std::isnan(estimate_total_probability(d, 6, 1, RngStream(1)).standard_error));
}
