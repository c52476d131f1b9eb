#pragma once

#include "bernrand/design.hpp"
#include "bernrand/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bernrand {

/// Simulation settings. Units are split into strata X = 1, 2, ... of the
/// given sizes; Y(0) | X ~ N(lambda X, 1); propensities ~ Beta(a, b).
struct SimConfig {
  std::size_t n_units = 100;
  std::vector<std::size_t> stratum_sizes{50, 50};
  std::vector<double> lambda_values{0.0, 1.5, 3.0};
  std::vector<double> tau_values{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t replications = 1000;
  double beta_a = 5.0;
  double beta_b = 5.0;
  double alpha = 0.05;
  /// Accepted rejection-sampling draws per test.
  std::size_t m_draws = 1000;
  /// Rejection budget per accepted draw. The observed assignment always
  /// satisfies the study's criteria, so the budget only has to outlast
  /// unlucky tail draws, not guard against empty supports.
  std::size_t attempt_factor = 100000;
  std::uint64_t seed = 20180101;
  /// Replication-level workers; 0 means hardware concurrency.
  unsigned threads = 1;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

/// The four supports compared in the study.
enum class ConditionalTest {
  Unconditional,      ///< nondegenerate assignments
  OnTotal,            ///< sum w = N_T^obs
  OnStratum1,         ///< treated count in X = 1 fixed
  OnTotalAndStratum1, ///< both
};
inline constexpr std::array<ConditionalTest, 4> kAllTests{
    ConditionalTest::Unconditional, ConditionalTest::OnTotal,
    ConditionalTest::OnStratum1, ConditionalTest::OnTotalAndStratum1};

std::string_view to_string(ConditionalTest t);

/// Potential outcomes and design, drawn once per lambda scenario.
struct Population {
  double lambda = 0.0;
  std::vector<int> stratum; ///< X_i in 1..K
  std::vector<double> y0;
  PropensityDesign design;

  std::vector<double> y1(double tau) const;
};

Population generate_population(const SimConfig& config, double lambda, RngStream rng);

/// Criterion for one of the four tests given the observed assignment.
AcceptanceCriterion conditional_criterion(ConditionalTest test, const Population& pop,
                                          const Assignment& w_obs);

/// Draws the observed assignment from the nondegenerate support.
Assignment draw_observed_assignment(const PropensityDesign& design, RngStream rng);

struct PowerRow {
  double lambda;
  double tau;
  std::string test;
  double rate;
  double se;
  std::size_t reps;
};

struct ContingencyRow {
  double lambda;
  std::size_t replication;
  std::size_t n_treated;
  std::size_t n_control;
  std::vector<std::size_t> stratum_treated; ///< N_T1, N_T2, ...
};

struct PowerStudyResult {
  std::vector<PowerRow> rows;
  std::vector<ContingencyRow> contingency;
};

PowerStudyResult run_power_study(const SimConfig& config);

struct ComparisonRow {
  double lambda;
  double tau;
  std::string test; ///< "rs" or "is_<M>"
  std::size_t m_draws;
  double rate;
  double se;
  std::size_t reps;
  double wall_ms; ///< summed over replications
};

/// Rejection sampling against importance sampling (one per M) for the test
/// conditioning on N_T and N_T1, on the same observed datasets.
std::vector<ComparisonRow> run_rs_vs_is_study(const SimConfig& config,
                                              const std::vector<std::size_t>& m_values);

/// Stream ids used by the study, exposed so tests can replay a replication.
namespace sim_streams {
std::uint64_t population(std::size_t scenario);
std::uint64_t observed(std::size_t scenario, std::size_t replication);
std::uint64_t test(std::size_t scenario, std::size_t tau_index, ConditionalTest test,
                   std::size_t replication);
std::uint64_t importance(std::size_t scenario, std::size_t tau_index,
                         std::size_t m_index, std::size_t replication);
} // namespace sim_streams

} // namespace bernrand
