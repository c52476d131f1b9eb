#include "bernrand/inference.hpp"

#include "bernrand/detail/numeric.hpp"
#include "bernrand/detail/parallel.hpp"
#include "bernrand/error.hpp"
#include "bernrand/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bernrand {

std::string_view to_string(Sidedness s) {
  switch (s) {
  case Sidedness::TwoSided:
    return "two";
  case Sidedness::Upper:
    return "upper";
  case Sidedness::Lower:
    return "lower";
  }
  return "?";
}

std::string_view to_string(Method m) {
  switch (m) {
  case Method::Exact:
    return "exact";
  case Method::RejectionSampling:
    return "rejection";
  case Method::ImportanceSampling:
    return "importance";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Hypotheses and statistics

void impute_outcomes_into(const ObservedStudy& study, const SharpHypothesis& hyp,
                          Bits w, std::span<double> out) {
  const std::size_t n = study.n_units();
  ensure(w.size() == n && out.size() == n, ErrorCode::LengthMismatch,
         "imputation needs an assignment of the study's length");
  const auto y = study.y_obs();
  const auto w_obs = study.w_obs().bits();
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + hyp.tau * (static_cast<double>(w[i]) - static_cast<double>(w_obs[i]));
}

std::vector<double> impute_outcomes(const ObservedStudy& study,
                                    const SharpHypothesis& hyp, Bits w) {
  std::vector<double> out(study.n_units());
  impute_outcomes_into(study, hyp, w, out);
  return out;
}

std::vector<double> effect_removed_outcomes(const ObservedStudy& study,
                                            const SharpHypothesis& hyp) {
  const auto y = study.y_obs();
  const auto w_obs = study.w_obs().bits();
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = y[i] - hyp.tau * static_cast<double>(w_obs[i]);
  return out;
}

double mean_difference(std::span<const double> outcomes, Bits w) {
  ensure(outcomes.size() == w.size(), ErrorCode::LengthMismatch,
         "outcomes and assignment differ in length");
  double treated = 0.0, control = 0.0;
  std::size_t n_treated = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i]) {
      treated += outcomes[i];
      ++n_treated;
    } else {
      control += outcomes[i];
    }
  }
  const std::size_t n_control = w.size() - n_treated;
  if (n_treated == 0 || n_control == 0)
    return 0.0;
  return treated / static_cast<double>(n_treated) -
         control / static_cast<double>(n_control);
}

TestStatistic::TestStatistic(std::string name, Fn fn)
    : name_(std::move(name)), fn_(std::move(fn)) {
  ensure(!name_.empty() && static_cast<bool>(fn_), ErrorCode::InvalidArgument,
         "a test statistic needs a name and a function");
}

TestStatistic TestStatistic::mean_difference() {
  return TestStatistic("mean-diff", [](std::span<const double> y, Bits w) {
    return bernrand::mean_difference(y, w);
  });
}

StatisticRegistry StatisticRegistry::with_builtins() {
  StatisticRegistry registry;
  registry.add(TestStatistic::mean_difference());
  return registry;
}

void StatisticRegistry::add(TestStatistic statistic) {
  const std::string name = statistic.name();
  entries_.insert_or_assign(name, std::move(statistic));
}

const TestStatistic& StatisticRegistry::get(std::string_view name) const {
  const auto it = entries_.find(name);
  ensure(it != entries_.end(), ErrorCode::InvalidArgument,
         "unknown test statistic '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> StatisticRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_)
    out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Randomization distributions

namespace {

double support_mass(const PropensityDesign& design, const SupportSpec& support,
                    const detail::CompensatedSum& enumerated) {
  const auto e = design.propensities();
  if (std::holds_alternative<SupportSpec::Full>(support.kind()))
    return 1.0;
  if (std::holds_alternative<SupportSpec::Nondegenerate>(support.kind())) {
    double all_treated = 1.0, all_control = 1.0;
    for (double p : e) {
      all_treated *= p;
      all_control *= 1.0 - p;
    }
    return 1.0 - all_treated - all_control;
  }
  if (const auto* fixed = std::get_if<SupportSpec::FixedTotal>(&support.kind()))
    return poisson_binomial_pmf(e, fixed->n_treated);
  return enumerated.value();
}

struct BlockPlan {
  std::size_t n_blocks;
  std::size_t block_size;

  std::size_t begin(std::size_t b) const { return b * block_size; }
  std::size_t length(std::size_t b, std::size_t total) const {
    return std::min(block_size, total - begin(b));
  }
};

BlockPlan plan_blocks(std::size_t total, std::size_t block_size) {
  block_size = std::max<std::size_t>(block_size, 1);
  return {(total + block_size - 1) / block_size, block_size};
}

void check_draws(std::size_t m_draws) {
  ensure(m_draws >= 1, ErrorCode::InvalidArgument,
         "the number of Monte Carlo draws must be at least 1");
}

} // namespace

RandomizationDistribution RandomizationDistribution::exact(const PropensityDesign& design,
                                                           const SupportSpec& support,
                                                           std::uint64_t limit) {
  RandomizationDistribution dist;
  dist.method_ = Method::Exact;
  dist.n_units_ = design.n_units();
  detail::CompensatedSum mass;
  for_each_in_support(design, support, limit, [&](Bits w, double kernel) {
    dist.bits_.insert(dist.bits_.end(), w.begin(), w.end());
    dist.weights_.push_back(kernel);
    mass += kernel;
  });
  ensure(!dist.weights_.empty() && mass.value() > 0.0, ErrorCode::Unsatisfiable,
         "the support " + support.name() + " contains no assignment");
  const double normalizer = support_mass(design, support, mass);
  for (double& w : dist.weights_)
    w /= normalizer;
  return dist;
}

RandomizationDistribution RandomizationDistribution::rejection(
    const PropensityDesign& design, const AcceptanceCriterion& criterion,
    std::size_t m_draws, const RngStream& rng, const MonteCarloOptions& options) {
  check_draws(m_draws);
  ensure(options.attempt_factor >= 1, ErrorCode::InvalidArgument,
         "attempt factor must be at least 1");
  const std::size_t n = design.n_units();
  const CoinFlipper coins(design.propensities());
  const BoundCriterion bound = criterion.bind(design);

  RandomizationDistribution dist;
  dist.method_ = Method::RejectionSampling;
  dist.n_units_ = n;
  dist.bits_.assign(m_draws * n, 0);
  dist.weights_.assign(m_draws, 1.0);

  const BlockPlan plan = plan_blocks(m_draws, options.block_size);
  std::vector<std::size_t> attempts(plan.n_blocks, 0);
  std::vector<std::size_t> accepted(plan.n_blocks, 0);
  std::vector<std::uint8_t> exhausted(plan.n_blocks, 0);
  detail::parallel_for(plan.n_blocks, options.threads, [&](std::size_t b) {
    const std::size_t len = plan.length(b, m_draws);
    RngStream block_rng = rng.substream(b);
    auto out = std::span<std::uint8_t>(dist.bits_).subspan(plan.begin(b) * n, len * n);
    try {
      attempts[b] = rejection_fill(coins, bound, len, len * options.attempt_factor,
                                   block_rng, out);
      accepted[b] = len;
    } catch (const BudgetExhaustedError& e) {
      attempts[b] = e.attempts();
      accepted[b] = e.accepted();
      exhausted[b] = 1;
    }
  });

  std::size_t total_attempts = 0, total_accepted = 0;
  for (std::size_t b = 0; b < plan.n_blocks; ++b) {
    total_attempts += attempts[b];
    total_accepted += accepted[b];
  }
  if (std::find(exhausted.begin(), exhausted.end(), 1) != exhausted.end())
    throw BudgetExhaustedError(
        total_accepted, total_attempts,
        "rejection sampling budget exhausted: " + std::to_string(total_accepted) +
            " of " + std::to_string(m_draws) + " draws accepted after " +
            std::to_string(total_attempts) + " attempts under '" +
            criterion.describe() + "'; the criterion may be too stringent");
  dist.acceptance_rate_ =
      static_cast<double>(total_accepted) / static_cast<double>(total_attempts);
  return dist;
}

RandomizationDistribution RandomizationDistribution::importance(
    const PropensityDesign& design, const AcceptanceCriterion& criterion,
    const Assignment& w_obs, std::size_t m_draws, const RngStream& rng,
    const MonteCarloOptions& options) {
  check_draws(m_draws);
  const std::size_t n = design.n_units();
  const UniformConditionalProposal proposal(design, criterion, w_obs);

  RandomizationDistribution dist;
  dist.method_ = Method::ImportanceSampling;
  dist.n_units_ = n;
  dist.bits_.assign(m_draws * n, 0);
  dist.weights_.assign(m_draws, 0.0);

  const BlockPlan plan = plan_blocks(m_draws, options.block_size);
  detail::parallel_for(plan.n_blocks, options.threads, [&](std::size_t b) {
    RngStream block_rng = rng.substream(b);
    const std::size_t first = plan.begin(b);
    for (std::size_t m = first; m < first + plan.length(b, m_draws); ++m) {
      auto slot = std::span<std::uint8_t>(dist.bits_).subspan(m * n, n);
      proposal.fill(block_rng, slot);
      dist.weights_[m] = design.log_kernel(slot);
    }
  });

  // Kernels relative to the largest one; the common factor cancels in the
  // self-normalized estimator and the exponentials cannot underflow to an
  // all-zero set.
  const double top = *std::max_element(dist.weights_.begin(), dist.weights_.end());
  detail::CompensatedSum sum, sum_sq;
  for (double& w : dist.weights_) {
    w = std::exp(w - top);
    sum += w;
    sum_sq += w * w;
  }
  dist.ess_ = sum.value() * sum.value() / sum_sq.value();
  return dist;
}

PValueReport RandomizationDistribution::p_value(const ObservedStudy& study,
                                                const SharpHypothesis& hyp,
                                                const TestStatistic& stat,
                                                Sidedness sided,
                                                const MonteCarloOptions& options) const {
  ensure(study.n_units() == n_units_, ErrorCode::LengthMismatch,
         "study and randomization distribution differ in length");

  const std::vector<double> outcomes = effect_removed_outcomes(study, hyp);
  const double t_obs = stat(outcomes, study.w_obs().bits());

  auto extreme = [t_obs, sided](double t) {
    switch (sided) {
    case Sidedness::Upper:
      return t >= t_obs;
    case Sidedness::Lower:
      return t <= t_obs;
    case Sidedness::TwoSided:
      break;
    }
    return std::fabs(t) >= std::fabs(t_obs);
  };

  struct Partial {
    detail::CompensatedSum weight, hit_weight, weight_sq, hit_weight_sq;
    std::size_t hits = 0;
  };
  const BlockPlan plan = plan_blocks(size(), options.block_size);
  std::vector<Partial> partials(plan.n_blocks);
  detail::parallel_for(plan.n_blocks, options.threads, [&](std::size_t b) {
    Partial& part = partials[b];
    const std::size_t first = plan.begin(b);
    for (std::size_t m = first; m < first + plan.length(b, size()); ++m) {
      const Bits w = draw(m);
      const bool hit = extreme(stat(outcomes, w));
      const double wt = weights_[m];
      part.weight += wt;
      part.weight_sq += wt * wt;
      if (hit) {
        ++part.hits;
        part.hit_weight += wt;
        part.hit_weight_sq += wt * wt;
      }
    }
  });
  Partial total;
  for (const auto& part : partials) {
    total.weight.merge(part.weight);
    total.hit_weight.merge(part.hit_weight);
    total.weight_sq.merge(part.weight_sq);
    total.hit_weight_sq.merge(part.hit_weight_sq);
    total.hits += part.hits;
  }

  PValueReport report;
  report.method = method_;
  report.sidedness = sided;
  report.t_obs = t_obs;
  report.draws_used = size();
  const auto m = static_cast<double>(size());

  switch (method_) {
  case Method::Exact:
    report.p_value = total.hit_weight.value();
    break;
  case Method::RejectionSampling: {
    const double hits = static_cast<double>(total.hits);
    const double denom = options.add_one ? m + 1.0 : m;
    report.p_value = options.add_one ? (hits + 1.0) / denom : hits / m;
    report.mc_standard_error =
        std::sqrt(report.p_value * (1.0 - report.p_value) / denom);
    report.acceptance_rate = acceptance_rate_;
    break;
  }
  case Method::ImportanceSampling: {
    const double sum_w = total.weight.value();
    const double p = total.hit_weight.value() / sum_w;
    report.p_value = p;
    // Delta-method standard error of the self-normalized ratio.
    const double a = total.hit_weight_sq.value();
    const double b = total.weight_sq.value();
    const double spread = (1.0 - p) * (1.0 - p) * a + p * p * (b - a);
    report.mc_standard_error = std::sqrt(std::max(spread, 0.0)) / sum_w;
    report.effective_sample_size = ess_;
    break;
  }
  }
  report.p_value = std::clamp(report.p_value, 0.0, 1.0);
  return report;
}

// ---------------------------------------------------------------------------
// Engines

PValueReport exact_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                           const TestStatistic& stat, const SupportSpec& support,
                           Sidedness sided, std::uint64_t limit) {
  return RandomizationDistribution::exact(study.design(), support, limit)
      .p_value(study, hyp, stat, sided);
}

PValueReport rejection_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                               const TestStatistic& stat,
                               const AcceptanceCriterion& criterion,
                               std::size_t m_draws, const RngStream& rng,
                               Sidedness sided, const MonteCarloOptions& options) {
  return RandomizationDistribution::rejection(study.design(), criterion, m_draws, rng,
                                              options)
      .p_value(study, hyp, stat, sided, options);
}

PValueReport importance_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                                const TestStatistic& stat,
                                const AcceptanceCriterion& criterion,
                                std::size_t m_draws, const RngStream& rng,
                                Sidedness sided, const MonteCarloOptions& options) {
  return RandomizationDistribution::importance(study.design(), criterion,
                                               study.w_obs(), m_draws, rng, options)
      .p_value(study, hyp, stat, sided, options);
}

RandomizationDistribution build_distribution(const ObservedStudy& study,
                                             const SupportSpec& support,
                                             const EngineConfig& engine) {
  support.validate(study.n_units());
  const RngStream rng(engine.seed, engine.stream);
  switch (engine.method) {
  case Method::Exact:
    return RandomizationDistribution::exact(study.design(), support,
                                            engine.enumeration_limit);
  case Method::RejectionSampling:
    return RandomizationDistribution::rejection(study.design(), support.as_criterion(),
                                                engine.draws, rng, engine.mc);
  case Method::ImportanceSampling:
    return RandomizationDistribution::importance(study.design(),
                                                 support.as_criterion(), study.w_obs(),
                                                 engine.draws, rng, engine.mc);
  }
  fail(ErrorCode::InvalidArgument, "unknown engine");
}

PValueReport run_test(const ObservedStudy& study, const SharpHypothesis& hyp,
                      const TestStatistic& stat, const SupportSpec& support,
                      const EngineConfig& engine) {
  return build_distribution(study, support, engine)
      .p_value(study, hyp, stat, engine.sided, engine.mc);
}

} // namespace bernrand
