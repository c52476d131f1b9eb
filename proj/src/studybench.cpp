#include "bernrand/studybench.hpp"

#include "bernrand/detail/parallel.hpp"
#include "bernrand/error.hpp"
#include "bernrand/inference.hpp"
#include "bernrand/samplers.hpp"

#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include <chrono>
#include <cmath>
#include <numeric>

namespace bernrand {

namespace {

void check_key(bool ok, const std::string& key, const std::string& why) {
  ensure(ok, ErrorCode::InvalidArgument, "config key '" + key + "' " + why);
}

// Layout: kind:4 | scenario:8 | tau index:12 | test or M index:8 | replication:32
std::uint64_t pack(std::uint64_t kind, std::size_t scenario, std::size_t tau_index,
                   std::size_t slot, std::size_t replication) {
  ensure(scenario < (1u << 8) && tau_index < (1u << 12) && slot < (1u << 8) &&
             replication <= 0xFFFFFFFFu,
         ErrorCode::OutOfRange, "simulation grid too large for stream ids");
  return (kind << 60) | (std::uint64_t{scenario} << 52) |
         (std::uint64_t{tau_index} << 40) | (std::uint64_t{slot} << 32) |
         std::uint64_t{replication};
}

double rate_se(double rate, std::size_t reps) {
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps));
}

ObservedStudy make_study(const Population& pop, const Assignment& w_obs, double tau) {
  std::vector<double> y(pop.y0);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (w_obs[i])
      y[i] += tau;
  return ObservedStudy(pop.design, w_obs, std::move(y));
}

} // namespace

namespace sim_streams {
std::uint64_t population(std::size_t scenario) { return pack(1, scenario, 0, 0, 0); }
std::uint64_t observed(std::size_t scenario, std::size_t replication) {
  return pack(2, scenario, 0, 0, replication);
}
std::uint64_t test(std::size_t scenario, std::size_t tau_index, ConditionalTest test,
                   std::size_t replication) {
  return pack(3, scenario, tau_index, static_cast<std::size_t>(test), replication);
}
std::uint64_t importance(std::size_t scenario, std::size_t tau_index,
                         std::size_t m_index, std::size_t replication) {
  return pack(4, scenario, tau_index, m_index, replication);
}
} // namespace sim_streams

namespace {
MonteCarloOptions mc_options(const SimConfig& config) {
  MonteCarloOptions options;
  options.attempt_factor = config.attempt_factor;
  return options;
}
} // namespace

void SimConfig::validate() const {
  check_key(n_units >= 2, "n_units", "must be at least 2");
  check_key(!stratum_sizes.empty(), "stratum_sizes", "must not be empty");
  for (auto s : stratum_sizes)
    check_key(s >= 1, "stratum_sizes", "entries must be positive");
  check_key(std::accumulate(stratum_sizes.begin(), stratum_sizes.end(), std::size_t{0}) ==
                n_units,
            "stratum_sizes", "must sum to n_units");
  check_key(!lambda_values.empty(), "lambda_values", "must not be empty");
  for (double l : lambda_values)
    check_key(std::isfinite(l), "lambda_values", "entries must be finite");
  check_key(!tau_values.empty(), "tau_values", "must not be empty");
  for (double t : tau_values)
    check_key(std::isfinite(t), "tau_values", "entries must be finite");
  check_key(replications >= 1, "replications", "must be positive");
  check_key(beta_a > 0.0 && std::isfinite(beta_a), "beta_params", "must be positive");
  check_key(beta_b > 0.0 && std::isfinite(beta_b), "beta_params", "must be positive");
  check_key(alpha > 0.0 && alpha < 1.0, "alpha", "must lie in (0, 1)");
  check_key(m_draws >= 1, "m_draws", "must be positive");
  check_key(attempt_factor >= 1, "attempt_factor", "must be positive");
}

std::string_view to_string(ConditionalTest t) {
  switch (t) {
  case ConditionalTest::Unconditional:
    return "unconditional";
  case ConditionalTest::OnTotal:
    return "cond_nt";
  case ConditionalTest::OnStratum1:
    return "cond_nt1";
  case ConditionalTest::OnTotalAndStratum1:
    return "cond_nt_nt1";
  }
  return "?";
}

std::vector<double> Population::y1(double tau) const {
  std::vector<double> out(y0);
  for (double& y : out)
    y += tau;
  return out;
}

Population generate_population(const SimConfig& config, double lambda, RngStream rng) {
  config.validate();
  const std::size_t n = config.n_units;
  std::vector<int> stratum;
  stratum.reserve(n);
  for (std::size_t k = 0; k < config.stratum_sizes.size(); ++k)
    stratum.insert(stratum.end(), config.stratum_sizes[k], static_cast<int>(k + 1));

  std::vector<double> y0(n);
  for (std::size_t i = 0; i < n; ++i)
    y0[i] = boost::random::normal_distribution<double>(lambda * stratum[i], 1.0)(rng);

  boost::random::beta_distribution<double> beta(config.beta_a, config.beta_b);
  std::vector<double> e(n);
  for (double& p : e) {
    do
      p = beta(rng);
    while (!(p > 0.0 && p < 1.0));
  }

  CovariateTable covariates;
  std::vector<CovariateValue> cells;
  cells.reserve(n);
  for (int x : stratum)
    cells.emplace_back(static_cast<double>(x));
  covariates.add_column("x", std::move(cells));
  return Population{lambda, std::move(stratum), std::move(y0),
                    PropensityDesign(std::move(e), std::move(covariates))};
}

AcceptanceCriterion conditional_criterion(ConditionalTest test, const Population& pop,
                                          const Assignment& w_obs) {
  std::size_t n_t1 = 0;
  for (std::size_t i = 0; i < w_obs.size(); ++i)
    n_t1 += (pop.stratum[i] == 1) * w_obs[i];
  switch (test) {
  case ConditionalTest::Unconditional:
    return AcceptanceCriterion::nondegenerate();
  case ConditionalTest::OnTotal:
    return AcceptanceCriterion::fixed_total(w_obs.treated_count());
  case ConditionalTest::OnStratum1:
    return AcceptanceCriterion().require_stratum("x", "1", n_t1);
  case ConditionalTest::OnTotalAndStratum1:
    return AcceptanceCriterion()
        .require_total(w_obs.treated_count())
        .require_stratum("x", "1", n_t1);
  }
  fail(ErrorCode::InvalidArgument, "unknown conditional test");
}

Assignment draw_observed_assignment(const PropensityDesign& design, RngStream rng) {
  const CoinFlipper coins(design.propensities());
  std::vector<std::uint8_t> bits(design.n_units());
  for (;;) {
    coins.fill(rng, bits);
    const auto ones = std::accumulate(bits.begin(), bits.end(), std::size_t{0});
    if (ones != 0 && ones != bits.size())
      return Assignment(std::move(bits));
  }
}

PowerStudyResult run_power_study(const SimConfig& config) {
  config.validate();
  const auto stat = TestStatistic::mean_difference();
  const std::size_t reps = config.replications;
  const std::size_t n_strata = config.stratum_sizes.size();
  PowerStudyResult result;

  for (std::size_t s = 0; s < config.lambda_values.size(); ++s) {
    const double lambda = config.lambda_values[s];
    const Population pop =
        generate_population(config, lambda, RngStream(config.seed, sim_streams::population(s)));

    std::vector<Assignment> observed(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      observed[r] = draw_observed_assignment(
          pop.design, RngStream(config.seed, sim_streams::observed(s, r)));
      ContingencyRow row{lambda, r, observed[r].treated_count(), 0,
                         std::vector<std::size_t>(n_strata, 0)};
      row.n_control = pop.y0.size() - row.n_treated;
      for (std::size_t i = 0; i < pop.y0.size(); ++i)
        row.stratum_treated[pop.stratum[i] - 1] += observed[r][i];
      result.contingency.push_back(std::move(row));
    }

    for (std::size_t t = 0; t < config.tau_values.size(); ++t) {
      const double tau = config.tau_values[t];
      // rejected[r][test]
      std::vector<std::array<std::uint8_t, kAllTests.size()>> rejected(reps);
      detail::parallel_for(reps, config.threads, [&](std::size_t r) {
        const ObservedStudy study = make_study(pop, observed[r], tau);
        for (std::size_t j = 0; j < kAllTests.size(); ++j) {
          const auto criterion = conditional_criterion(kAllTests[j], pop, observed[r]);
          const RngStream rng(config.seed, sim_streams::test(s, t, kAllTests[j], r));
          const PValueReport report =
              rejection_p_value(study, SharpHypothesis{0.0}, stat, criterion, config.m_draws,
                                rng, Sidedness::TwoSided, mc_options(config));
          rejected[r][j] = report.p_value <= config.alpha;
        }
      });
      for (std::size_t j = 0; j < kAllTests.size(); ++j) {
        std::size_t count = 0;
        for (const auto& row : rejected)
          count += row[j];
        const double rate = static_cast<double>(count) / static_cast<double>(reps);
        result.rows.push_back({lambda, tau, std::string(to_string(kAllTests[j])), rate,
                               rate_se(rate, reps), reps});
      }
    }
  }
  return result;
}

std::vector<ComparisonRow> run_rs_vs_is_study(const SimConfig& config,
                                              const std::vector<std::size_t>& m_values) {
  config.validate();
  ensure(!m_values.empty(), ErrorCode::InvalidArgument,
         "config key 'is_m_values' must not be empty");
  for (auto m : m_values)
    ensure(m >= 1, ErrorCode::InvalidArgument,
           "config key 'is_m_values' entries must be positive");
  const auto stat = TestStatistic::mean_difference();
  const std::size_t reps = config.replications;
  const std::size_t n_methods = m_values.size() + 1;
  constexpr auto kTest = ConditionalTest::OnTotalAndStratum1;
  using Clock = std::chrono::steady_clock;
  std::vector<ComparisonRow> rows;

  for (std::size_t s = 0; s < config.lambda_values.size(); ++s) {
    const double lambda = config.lambda_values[s];
    const Population pop =
        generate_population(config, lambda, RngStream(config.seed, sim_streams::population(s)));
    std::vector<Assignment> observed(reps);
    for (std::size_t r = 0; r < reps; ++r)
      observed[r] = draw_observed_assignment(
          pop.design, RngStream(config.seed, sim_streams::observed(s, r)));

    for (std::size_t t = 0; t < config.tau_values.size(); ++t) {
      const double tau = config.tau_values[t];
      // Per replication and method: rejection flag and elapsed time.
      std::vector<std::vector<std::uint8_t>> rejected(reps, std::vector<std::uint8_t>(n_methods));
      std::vector<std::vector<double>> elapsed(reps, std::vector<double>(n_methods));
      detail::parallel_for(reps, config.threads, [&](std::size_t r) {
        const ObservedStudy study = make_study(pop, observed[r], tau);
        const auto criterion = conditional_criterion(kTest, pop, observed[r]);

        auto start = Clock::now();
        const PValueReport rs = rejection_p_value(
            study, SharpHypothesis{0.0}, stat, criterion, config.m_draws,
            RngStream(config.seed, sim_streams::test(s, t, kTest, r)), Sidedness::TwoSided,
            mc_options(config));
        elapsed[r][0] = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        rejected[r][0] = rs.p_value <= config.alpha;

        for (std::size_t k = 0; k < m_values.size(); ++k) {
          start = Clock::now();
          const PValueReport is = importance_p_value(
              study, SharpHypothesis{0.0}, stat, criterion, m_values[k],
              RngStream(config.seed, sim_streams::importance(s, t, k, r)));
          elapsed[r][k + 1] =
              std::chrono::duration<double, std::milli>(Clock::now() - start).count();
          rejected[r][k + 1] = is.p_value <= config.alpha;
        }
      });

      for (std::size_t k = 0; k < n_methods; ++k) {
        std::size_t count = 0;
        double wall = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
          count += rejected[r][k];
          wall += elapsed[r][k];
        }
        const double rate = static_cast<double>(count) / static_cast<double>(reps);
        const std::size_t m = k == 0 ? config.m_draws : m_values[k - 1];
        rows.push_back({lambda, tau, k == 0 ? std::string("rs") : "is_" + std::to_string(m),
                        m, rate, rate_se(rate, reps), reps, wall});
      }
    }
  }
  return rows;
}

} // namespace bernrand
