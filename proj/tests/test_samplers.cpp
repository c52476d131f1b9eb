#include "bernrand/error.hpp"
#include "bernrand/samplers.hpp"

#include "oracles.hpp"
#include "table1.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace bernrand;

namespace {

double chi_square_p(double statistic, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

std::uint64_t code_of(Bits w) {
  std::uint64_t c = 0;
  for (auto b : w)
    c = (c << 1) | b;
  return c;
}

PropensityDesign stratified(std::vector<double> e, std::vector<double> x) {
  CovariateTable cov;
  std::vector<CovariateValue> cells(x.begin(), x.end());
  cov.add_column("x", std::move(cells));
  return PropensityDesign(std::move(e), std::move(cov));
}

} // namespace

TEST(BernoulliDraw, FairCoinsPerUnitFraction) {
  const PropensityDesign d(std::vector<double>(10, 0.5));
  RngStream rng(1);
  const int n = 100000;
  std::vector<int> treated(10, 0);
  for (int i = 0; i < n; ++i) {
    const auto w = bernoulli_draw(d, rng);
    for (std::size_t u = 0; u < 10; ++u)
      treated[u] += w[u];
  }
  for (int t : treated)
    EXPECT_NEAR(t / double(n), 0.5, 4.0 * std::sqrt(0.25 / n));
}

TEST(BernoulliDraw, WorkedExampleTotalMean) {
  const PropensityDesign d(table1::propensity);
  RngStream rng(2);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(bernoulli_draw(d, rng).treated_count());
    sum += t;
    sum_sq += t * t;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum_sq - n * mean * mean) / (n - 1));
  EXPECT_LT(std::fabs(mean - 5.0), 4.0 * sd / std::sqrt(n));
}

TEST(BernoulliDraw, TwoUnitPatternsChiSquare) {
  const std::vector<double> e{0.1, 0.9};
  const PropensityDesign d(e);
  RngStream rng(3);
  const int n = 100000;
  std::vector<double> counts(4, 0.0), probs(4);
  for (int c = 0; c < 4; ++c)
    probs[c] = oracle::kernel(e, oracle::bits_of(c, 2));
  for (int i = 0; i < n; ++i)
    counts[code_of(bernoulli_draw(d, rng).bits())] += 1;
  EXPECT_GT(chi_square_p(oracle::chi_square(counts, probs, n), 3), 0.001);
}

TEST(BernoulliDraw, Deterministic) {
  const PropensityDesign d(table1::propensity);
  RngStream a(9, 4), b(9, 4);
  for (int i = 0; i < 100; ++i)
    ASSERT_EQ(bernoulli_draw(d, a), bernoulli_draw(d, b));
}

TEST(DrawBudget, Validation) {
  EXPECT_THROW(DrawBudget({0, 0}).validate(), Error);
  EXPECT_THROW(DrawBudget({5, 10}).validate(), Error);
  EXPECT_NO_THROW(DrawBudget({10, 10}).validate());
  EXPECT_EQ(DrawBudget::for_target(7).max_attempts, 7000u);
}

TEST(RejectionSample, AcceptAllEqualsBernoulliDraws) {
  const PropensityDesign d(table1::propensity);
  RngStream a(5), b(5);
  const auto sample =
      rejection_sample(d, AcceptanceCriterion::accept_all(), DrawBudget::for_target(50), a);
  EXPECT_EQ(sample.attempts, 50u);
  EXPECT_DOUBLE_EQ(sample.acceptance_rate, 1.0);
  for (const auto& w : sample.draws)
    ASSERT_EQ(w, bernoulli_draw(d, b));
}

TEST(RejectionSample, EqualPropensityFixedTotalIsUniform) {
  const PropensityDesign d(std::vector<double>(6, 0.5));
  RngStream rng(6);
  const std::size_t n = 100000;
  const auto sample = rejection_sample(d, AcceptanceCriterion::fixed_total(3),
                                       DrawBudget::for_target(n), rng);
  std::map<std::uint64_t, double> counts;
  for (const auto& w : sample.draws) {
    ASSERT_EQ(w.treated_count(), 3u);
    counts[code_of(w.bits())] += 1;
  }
  ASSERT_EQ(counts.size(), 20u);
  std::vector<double> observed, probs;
  for (const auto& [code, c] : counts) {
    observed.push_back(c);
    probs.push_back(1.0 / 20);
  }
  EXPECT_GT(chi_square_p(oracle::chi_square(observed, probs, n), 19), 0.001);
}

TEST(RejectionSample, AcceptanceRateConvergesToPmf) {
  const PropensityDesign d(table1::propensity);
  RngStream rng(7);
  // Target large enough that about 1e5 attempts are spent.
  const double p = oracle::pmf(table1::propensity, 6);
  const auto target = static_cast<std::size_t>(100000 * p);
  const auto sample = rejection_sample(d, AcceptanceCriterion::fixed_total(6),
                                       DrawBudget::for_target(target), rng);
  const double attempts = static_cast<double>(sample.attempts);
  EXPECT_LT(std::fabs(sample.acceptance_rate - p), 4.0 * std::sqrt(p * (1 - p) / attempts));
}

TEST(RejectionSample, BudgetExhaustedCarriesCount) {
  const PropensityDesign d({0.01, 0.01, 0.01});
  RngStream rng(8);
  try {
    (void)rejection_sample(d, AcceptanceCriterion::fixed_total(3), DrawBudget{100, 10}, rng);
    FAIL() << "expected BudgetExhaustedError";
  } catch (const BudgetExhaustedError& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExhausted);
    EXPECT_EQ(e.attempts(), 100u);
    EXPECT_LT(e.accepted(), 10u);
  }
}

TEST(RejectionSample, ZeroProbabilityCriterionExhaustsBudget) {
  const PropensityDesign d({0.5, 0.5});
  AcceptanceCriterion never;
  never.require("never", [](Bits, const CovariateTable*) { return false; });
  RngStream rng(1);
  EXPECT_THROW((void)rejection_sample(d, never, DrawBudget::for_target(2, 10), rng),
               BudgetExhaustedError);
}

TEST(UniformProposal, SingleStratumUniform) {
  const PropensityDesign d({0.2, 0.4, 0.6, 0.8});
  const Assignment w_obs = Assignment::from_string("0110");
  const UniformConditionalProposal proposal(d, AcceptanceCriterion::fixed_total(2), w_obs);
  EXPECT_NEAR(proposal.log_support_size(), std::log(6.0), 1e-12);
  RngStream rng(9);
  const int n = 100000;
  std::map<std::uint64_t, double> counts;
  for (int i = 0; i < n; ++i) {
    const auto w = proposal.draw(rng);
    ASSERT_EQ(w.treated_count(), 2u);
    counts[code_of(w.bits())] += 1;
  }
  ASSERT_EQ(counts.size(), 6u);
  std::vector<double> observed, probs;
  for (const auto& [code, c] : counts) {
    observed.push_back(c);
    probs.push_back(1.0 / 6);
  }
  EXPECT_GT(chi_square_p(oracle::chi_square(observed, probs, n), 5), 0.001);
}

TEST(UniformProposal, TwoStrataOneTreatedEach) {
  const auto d = stratified({0.3, 0.3, 0.7, 0.7}, {1, 1, 2, 2});
  AcceptanceCriterion c;
  c.require_stratum("x", "1", 1).require_stratum("x", "2", 1);
  const UniformConditionalProposal proposal(d, c, Assignment::from_string("1001"));
  RngStream rng(10);
  const int n = 40000;
  std::map<std::uint64_t, double> counts;
  for (int i = 0; i < n; ++i) {
    const auto w = proposal.draw(rng);
    ASSERT_TRUE(c.accepts(d, w.bits()));
    counts[code_of(w.bits())] += 1;
  }
  ASSERT_EQ(counts.size(), 4u);
  std::vector<double> observed, probs;
  for (const auto& [code, cnt] : counts) {
    observed.push_back(cnt);
    probs.push_back(0.25);
  }
  EXPECT_GT(chi_square_p(oracle::chi_square(observed, probs, n), 3), 0.001);
}

TEST(UniformProposal, StrataCountsAlwaysHeld) {
  // Strata of 50 and 50 with 30 and 24 treated.
  std::vector<double> e(100, 0.5), x(100);
  std::vector<std::uint8_t> w(100, 0);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = i < 50 ? 1.0 : 2.0;
    w[i] = i < 50 ? (i < 30) : (i < 74);
  }
  const auto d = stratified(e, x);
  AcceptanceCriterion c;
  c.require_total(54).require_stratum("x", "1", 30);
  const UniformConditionalProposal proposal(d, c, Assignment(w));
  RngStream rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto draw = proposal.draw(rng);
    std::size_t t1 = 0, t2 = 0;
    for (std::size_t u = 0; u < 100; ++u)
      (u < 50 ? t1 : t2) += draw[u];
    ASSERT_EQ(t1, 30u);
    ASSERT_EQ(t2, 24u);
  }
}

TEST(UniformProposal, RejectsUnsupportedCriteria) {
  const PropensityDesign d({0.5, 0.5, 0.5});
  try {
    UniformConditionalProposal(d, AcceptanceCriterion::nondegenerate(),
                               Assignment::from_string("010"));
    FAIL() << "expected UnsupportedCriterion";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedCriterion);
  }
  EXPECT_THROW(UniformConditionalProposal(d, AcceptanceCriterion::fixed_total(2),
                                          Assignment::from_string("010")),
               Error);
}
