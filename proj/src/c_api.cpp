#include "bernrand/bernrand.h"

#include "bernrand/design.hpp"
#include "bernrand/error.hpp"
#include "bernrand/inference.hpp"
#include "bernrand/inversion.hpp"
#include "bernrand/samplers.hpp"
#include "bernrand/studybench.hpp"

#include <algorithm>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

using namespace bernrand;

struct br_design {
  PropensityDesign design;
};

struct br_criterion {
  AcceptanceCriterion criterion;
};

struct br_study {
  ObservedStudy study;
};

struct br_inversion {
  InversionResult result;
};

struct br_enumeration {
  std::size_t n_units = 0;
  std::vector<std::uint8_t> bits;
  std::vector<double> probability;
  std::vector<double> statistic;
};

struct br_sim_result {
  std::size_t n_strata = 0;
  PowerStudyResult power;
  std::vector<ComparisonRow> comparison;
};

namespace {

thread_local std::string g_last_error;

br_status to_status(ErrorCode code) {
  switch (code) {
  case ErrorCode::InvalidArgument:
    return BR_INVALID_ARGUMENT;
  case ErrorCode::LengthMismatch:
    return BR_LENGTH_MISMATCH;
  case ErrorCode::OutOfRange:
    return BR_OUT_OF_RANGE;
  case ErrorCode::TooLargeToEnumerate:
    return BR_TOO_LARGE;
  case ErrorCode::BudgetExhausted:
    return BR_BUDGET_EXHAUSTED;
  case ErrorCode::UnsupportedCriterion:
    return BR_UNSUPPORTED_CRITERION;
  case ErrorCode::Unsatisfiable:
    return BR_UNSATISFIABLE;
  }
  return BR_INTERNAL;
}

template <class Fn>
br_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return BR_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return BR_INTERNAL;
  }
}

template <class T>
void need(const T* ptr, const char* what) {
  ensure(ptr != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::vector<std::uint8_t> copy_bits(const unsigned char* bits, std::size_t n) {
  need(bits, "assignment");
  return std::vector<std::uint8_t>(bits, bits + n);
}

SupportSpec to_support(const br_support* support) {
  need(support, "support");
  switch (support->kind) {
  case BR_SUPPORT_FULL:
    return SupportSpec::full();
  case BR_SUPPORT_NONDEGENERATE:
    return SupportSpec::nondegenerate();
  case BR_SUPPORT_FIXED_TOTAL:
    return SupportSpec::fixed_total(support->n_treated);
  case BR_SUPPORT_CRITERION:
    need(support->criterion, "support criterion");
    return SupportSpec::criterion(support->criterion->criterion);
  }
  fail(ErrorCode::InvalidArgument, "unknown support kind");
}

TestStatistic to_statistic(const br_statistic* statistic) {
  if (!statistic || !statistic->fn)
    return TestStatistic::mean_difference();
  const br_statistic copy = *statistic;
  return TestStatistic(copy.name && *copy.name ? copy.name : "custom",
                       [copy](std::span<const double> y, Bits w) {
                         return copy.fn(y.data(), w.data(), y.size(), copy.user_data);
                       });
}

EngineConfig to_engine(const br_engine* engine) {
  br_engine defaults;
  br_engine_defaults(&defaults);
  const br_engine& e = engine ? *engine : defaults;
  EngineConfig out;
  switch (e.method) {
  case BR_METHOD_EXACT:
    out.method = Method::Exact;
    break;
  case BR_METHOD_REJECTION:
    out.method = Method::RejectionSampling;
    break;
  case BR_METHOD_IMPORTANCE:
    out.method = Method::ImportanceSampling;
    break;
  default:
    fail(ErrorCode::InvalidArgument, "unknown method");
  }
  switch (e.sidedness) {
  case BR_TWO_SIDED:
    out.sided = Sidedness::TwoSided;
    break;
  case BR_UPPER:
    out.sided = Sidedness::Upper;
    break;
  case BR_LOWER:
    out.sided = Sidedness::Lower;
    break;
  default:
    fail(ErrorCode::InvalidArgument, "unknown sidedness");
  }
  out.draws = e.draws;
  out.seed = e.seed;
  out.stream = e.stream;
  out.mc.threads = e.threads;
  out.mc.add_one = e.add_one != 0;
  out.mc.attempt_factor = e.attempt_factor;
  out.enumeration_limit = e.enumeration_limit;
  return out;
}

br_method from_method(Method m) {
  switch (m) {
  case Method::Exact:
    return BR_METHOD_EXACT;
  case Method::RejectionSampling:
    return BR_METHOD_REJECTION;
  case Method::ImportanceSampling:
    return BR_METHOD_IMPORTANCE;
  }
  return BR_METHOD_EXACT;
}

br_sidedness from_sidedness(Sidedness s) {
  switch (s) {
  case Sidedness::TwoSided:
    return BR_TWO_SIDED;
  case Sidedness::Upper:
    return BR_UPPER;
  case Sidedness::Lower:
    return BR_LOWER;
  }
  return BR_TWO_SIDED;
}

void fill_row(br_table_row* row, double lambda, double tau, const std::string& test,
              double rate, double se, std::size_t reps, std::size_t m, double wall_ms) {
  *row = {lambda, tau, test.c_str(), rate, se, reps, m, wall_ms};
}

const std::size_t kDefaultStrata[] = {50, 50};
const double kDefaultLambdas[] = {0.0, 1.5, 3.0};
const double kDefaultTaus[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
const std::uint64_t kDefaultIsM[] = {1000, 5000, 25000};

} // namespace

extern "C" {

const char* br_last_error(void) { return g_last_error.c_str(); }

const char* br_status_name(br_status status) {
  switch (status) {
  case BR_OK:
    return "ok";
  case BR_INVALID_ARGUMENT:
    return "invalid_argument";
  case BR_LENGTH_MISMATCH:
    return "length_mismatch";
  case BR_OUT_OF_RANGE:
    return "out_of_range";
  case BR_TOO_LARGE:
    return "too_large_to_enumerate";
  case BR_BUDGET_EXHAUSTED:
    return "budget_exhausted";
  case BR_UNSUPPORTED_CRITERION:
    return "unsupported_criterion";
  case BR_UNSATISFIABLE:
    return "unsatisfiable";
  case BR_INTERNAL:
    return "internal";
  }
  return "unknown";
}

const char* br_version(void) { return BERNRAND_VERSION_STRING; }

// ---- designs ---------------------------------------------------------------

br_status br_design_create(const double* propensities, size_t n_units, br_design** out) {
  return guarded([&] {
    need(out, "out");
    need(propensities, "propensities");
    *out = new br_design{PropensityDesign(
        std::vector<double>(propensities, propensities + n_units))};
  });
}

namespace {
br_status add_covariate(br_design* design, const char* name,
                        std::vector<CovariateValue> cells) {
  return guarded([&] {
    need(design, "design");
    need(name, "covariate name");
    CovariateTable table;
    if (const auto* existing = design->design.covariates())
      table = *existing;
    table.add_column(name, std::move(cells));
    const auto e = design->design.propensities();
    design->design = PropensityDesign(std::vector<double>(e.begin(), e.end()),
                                      std::move(table));
  });
}
} // namespace

br_status br_design_add_numeric_covariate(br_design* design, const char* name,
                                          const double* values, size_t n) {
  if (!values) {
    g_last_error = "covariate values is NULL";
    return BR_INVALID_ARGUMENT;
  }
  return add_covariate(design, name, std::vector<CovariateValue>(values, values + n));
}

br_status br_design_add_categorical_covariate(br_design* design, const char* name,
                                              const char* const* values, size_t n) {
  if (!values) {
    g_last_error = "covariate values is NULL";
    return BR_INVALID_ARGUMENT;
  }
  std::vector<CovariateValue> cells;
  cells.reserve(n);
  for (size_t i = 0; i < n; ++i)
    cells.emplace_back(std::string(values[i] ? values[i] : ""));
  return add_covariate(design, name, std::move(cells));
}

size_t br_design_size(const br_design* design) {
  return design ? design->design.n_units() : 0;
}

void br_design_destroy(br_design* design) { delete design; }

// ---- criteria --------------------------------------------------------------

br_status br_criterion_create(br_criterion** out) {
  return guarded([&] {
    need(out, "out");
    *out = new br_criterion{};
  });
}

br_status br_criterion_require_total(br_criterion* c, size_t n_treated) {
  return guarded([&] {
    need(c, "criterion");
    c->criterion.require_total(n_treated);
  });
}

br_status br_criterion_require_stratum(br_criterion* c, const char* column,
                                       const char* value, size_t count) {
  return guarded([&] {
    need(c, "criterion");
    need(column, "column");
    need(value, "value");
    c->criterion.require_stratum(column, value, count);
  });
}

br_status br_criterion_require_predicate(br_criterion* c, const char* name,
                                         br_predicate_fn fn, void* user_data) {
  return guarded([&] {
    need(c, "criterion");
    ensure(fn != nullptr, ErrorCode::InvalidArgument, "predicate function is NULL");
    c->criterion.require(name ? name : "predicate",
                         [fn, user_data](Bits w, const CovariateTable*) {
                           return fn(w.data(), w.size(), user_data) != 0;
                         });
  });
}

void br_criterion_destroy(br_criterion* c) { delete c; }

// ---- design-level computations ----------------------------------------------

namespace {
std::uint64_t limit_or_default(std::uint64_t limit) {
  return limit == 0 ? kDefaultEnumerationLimit : limit;
}
} // namespace

br_status br_assignment_probability(const br_design* design, const unsigned char* w,
                                    size_t n, const br_support* support,
                                    uint64_t enumeration_limit, double* out) {
  return guarded([&] {
    need(design, "design");
    need(out, "out");
    *out = assignment_probability(design->design, Assignment(copy_bits(w, n)),
                                  to_support(support), limit_or_default(enumeration_limit));
  });
}

br_status br_poisson_binomial_pmf(const double* propensities, size_t n, size_t k,
                                  double* out) {
  return guarded([&] {
    need(out, "out");
    need(propensities, "propensities");
    *out = poisson_binomial_pmf(std::span<const double>(propensities, n), k);
  });
}

br_status br_estimate_total_probability(const br_design* design, size_t n_treated,
                                        uint64_t m_draws, uint64_t seed, double* estimate,
                                        double* standard_error) {
  return guarded([&] {
    need(design, "design");
    need(estimate, "estimate");
    const auto result =
        estimate_total_probability(design->design, n_treated, m_draws, RngStream(seed));
    *estimate = result.estimate;
    if (standard_error)
      *standard_error = result.standard_error;
  });
}

// ---- studies and tests ------------------------------------------------------

br_status br_study_create(const br_design* design, const unsigned char* w_obs,
                          const double* y_obs, size_t n, br_study** out) {
  return guarded([&] {
    need(design, "design");
    need(out, "out");
    need(y_obs, "outcomes");
    *out = new br_study{ObservedStudy(design->design, Assignment(copy_bits(w_obs, n)),
                                      std::vector<double>(y_obs, y_obs + n))};
  });
}

size_t br_study_size(const br_study* study) { return study ? study->study.n_units() : 0; }

void br_study_destroy(br_study* study) { delete study; }

void br_engine_defaults(br_engine* engine) {
  if (!engine)
    return;
  *engine = br_engine{};
  engine->method = BR_METHOD_EXACT;
  engine->sidedness = BR_TWO_SIDED;
  engine->draws = kDefaultDraws;
  engine->seed = 0;
  engine->stream = 0;
  engine->threads = 1;
  engine->add_one = 0;
  engine->attempt_factor = DrawBudget::kDefaultAttemptFactor;
  engine->enumeration_limit = kDefaultEnumerationLimit;
}

br_status br_test(const br_study* study, double tau, const br_support* support,
                  const br_statistic* statistic, const br_engine* engine, br_report* out) {
  return guarded([&] {
    need(study, "study");
    need(out, "out");
    const PValueReport report =
        run_test(study->study, SharpHypothesis{tau}, to_statistic(statistic),
                 to_support(support), to_engine(engine));
    *out = br_report{};
    out->p_value = report.p_value;
    out->method = from_method(report.method);
    out->sidedness = from_sidedness(report.sidedness);
    out->draws_used = report.draws_used;
    out->t_obs = report.t_obs;
    out->has_mc_standard_error = report.mc_standard_error.has_value();
    out->mc_standard_error = report.mc_standard_error.value_or(0.0);
    out->has_effective_sample_size = report.effective_sample_size.has_value();
    out->effective_sample_size = report.effective_sample_size.value_or(0.0);
    out->has_acceptance_rate = report.acceptance_rate.has_value();
    out->acceptance_rate = report.acceptance_rate.value_or(0.0);
  });
}

// ---- inversion ---------------------------------------------------------------

br_status br_invert(const br_study* study, const br_support* support,
                    const br_statistic* statistic, double tau_lo, double tau_hi,
                    double tau_step, double alpha, const br_engine* engine,
                    br_inversion** out) {
  return guarded([&] {
    need(study, "study");
    need(out, "out");
    *out = new br_inversion{invert_test(study->study, to_statistic(statistic),
                                        to_support(support),
                                        TauGrid{tau_lo, tau_hi, tau_step}, alpha,
                                        to_engine(engine))};
  });
}

int br_inversion_interval(const br_inversion* inv, double* lo, double* hi) {
  if (!inv || !inv->result.ci_lo)
    return 0;
  if (lo)
    *lo = *inv->result.ci_lo;
  if (hi)
    *hi = *inv->result.ci_hi;
  return 1;
}

double br_inversion_point_estimate(const br_inversion* inv) {
  return inv ? inv->result.point_estimate : 0.0;
}

int br_inversion_contiguous(const br_inversion* inv) {
  return inv ? inv->result.contiguous : 0;
}

size_t br_inversion_curve_size(const br_inversion* inv) {
  return inv ? inv->result.p_curve.size() : 0;
}

br_status br_inversion_curve_point(const br_inversion* inv, size_t index, double* tau,
                                   double* p_value) {
  return guarded([&] {
    need(inv, "inversion");
    ensure(index < inv->result.p_curve.size(), ErrorCode::OutOfRange,
           "curve index out of range");
    if (tau)
      *tau = inv->result.p_curve[index].tau;
    if (p_value)
      *p_value = inv->result.p_curve[index].p_value;
  });
}

uint64_t br_inversion_draws(const br_inversion* inv) { return inv ? inv->result.draws : 0; }

size_t br_inversion_diagnostic_count(const br_inversion* inv) {
  return inv ? inv->result.diagnostics.size() : 0;
}

const char* br_inversion_diagnostic(const br_inversion* inv, size_t index) {
  if (!inv || index >= inv->result.diagnostics.size())
    return nullptr;
  return inv->result.diagnostics[index].c_str();
}

void br_inversion_destroy(br_inversion* inv) { delete inv; }

// ---- enumeration ---------------------------------------------------------------

br_status br_enumerate(const br_study* study, const br_support* support,
                       const br_statistic* statistic, double tau,
                       uint64_t enumeration_limit, br_enumeration** out) {
  return guarded([&] {
    need(study, "study");
    need(out, "out");
    const ObservedStudy& s = study->study;
    const auto dist = RandomizationDistribution::exact(s.design(), to_support(support),
                                                       limit_or_default(enumeration_limit));
    const TestStatistic stat = to_statistic(statistic);
    auto result = std::make_unique<br_enumeration>();
    result->n_units = s.n_units();
    result->bits.reserve(dist.size() * s.n_units());
    const std::vector<double> outcomes = effect_removed_outcomes(s, SharpHypothesis{tau});
    for (std::size_t i = 0; i < dist.size(); ++i) {
      const Bits w = dist.draw(i);
      result->bits.insert(result->bits.end(), w.begin(), w.end());
      result->probability.push_back(dist.weight(i));
      result->statistic.push_back(stat(outcomes, w));
    }
    *out = result.release();
  });
}

size_t br_enumeration_size(const br_enumeration* e) {
  return e ? e->probability.size() : 0;
}

size_t br_enumeration_units(const br_enumeration* e) { return e ? e->n_units : 0; }

br_status br_enumeration_row(const br_enumeration* e, size_t index, unsigned char* bits,
                             double* probability, double* statistic) {
  return guarded([&] {
    need(e, "enumeration");
    ensure(index < e->probability.size(), ErrorCode::OutOfRange,
           "enumeration index out of range");
    if (bits)
      std::copy_n(e->bits.begin() + static_cast<std::ptrdiff_t>(index * e->n_units),
                  e->n_units, bits);
    if (probability)
      *probability = e->probability[index];
    if (statistic)
      *statistic = e->statistic[index];
  });
}

void br_enumeration_destroy(br_enumeration* e) { delete e; }

// ---- simulation -----------------------------------------------------------------

void br_sim_config_defaults(br_sim_config* config) {
  if (!config)
    return;
  const SimConfig defaults;
  *config = br_sim_config{};
  config->n_units = defaults.n_units;
  config->stratum_sizes = kDefaultStrata;
  config->n_strata = std::size(kDefaultStrata);
  config->lambda_values = kDefaultLambdas;
  config->n_lambda = std::size(kDefaultLambdas);
  config->tau_values = kDefaultTaus;
  config->n_tau = std::size(kDefaultTaus);
  config->replications = defaults.replications;
  config->beta_a = defaults.beta_a;
  config->beta_b = defaults.beta_b;
  config->alpha = defaults.alpha;
  config->m_draws = defaults.m_draws;
  config->attempt_factor = defaults.attempt_factor;
  config->seed = defaults.seed;
  config->threads = defaults.threads;
  config->is_m_values = kDefaultIsM;
  config->n_is_m = std::size(kDefaultIsM);
  config->run_power = 1;
  config->run_comparison = 1;
}

br_status br_simulate(const br_sim_config* config, br_sim_result** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    auto array = [](const auto* data, std::size_t n, const char* key) {
      ensure(n == 0 || data != nullptr, ErrorCode::InvalidArgument,
             std::string("config key '") + key + "' is NULL");
      using T = std::remove_cv_t<std::remove_pointer_t<decltype(data)>>;
      return n == 0 ? std::vector<T>{} : std::vector<T>(data, data + n);
    };
    SimConfig sim;
    sim.n_units = config->n_units;
    sim.stratum_sizes = array(config->stratum_sizes, config->n_strata, "stratum_sizes");
    sim.lambda_values = array(config->lambda_values, config->n_lambda, "lambda_values");
    sim.tau_values = array(config->tau_values, config->n_tau, "tau_values");
    sim.replications = config->replications;
    sim.beta_a = config->beta_a;
    sim.beta_b = config->beta_b;
    sim.alpha = config->alpha;
    sim.m_draws = config->m_draws;
    sim.attempt_factor = config->attempt_factor;
    sim.seed = config->seed;
    sim.threads = config->threads;
    sim.validate();
    const auto m64 = array(config->is_m_values, config->n_is_m, "is_m_values");
    const std::vector<std::size_t> m_values(m64.begin(), m64.end());

    auto result = std::make_unique<br_sim_result>();
    result->n_strata = sim.stratum_sizes.size();
    if (config->run_power)
      result->power = run_power_study(sim);
    if (config->run_comparison)
      result->comparison = run_rs_vs_is_study(sim, m_values);
    *out = result.release();
  });
}

size_t br_sim_power_rows(const br_sim_result* r) { return r ? r->power.rows.size() : 0; }

br_status br_sim_power_row(const br_sim_result* r, size_t index, br_table_row* row) {
  return guarded([&] {
    need(r, "result");
    need(row, "row");
    ensure(index < r->power.rows.size(), ErrorCode::OutOfRange, "row index out of range");
    const auto& p = r->power.rows[index];
    fill_row(row, p.lambda, p.tau, p.test, p.rate, p.se, p.reps, 0, 0.0);
  });
}

size_t br_sim_comparison_rows(const br_sim_result* r) {
  return r ? r->comparison.size() : 0;
}

br_status br_sim_comparison_row(const br_sim_result* r, size_t index, br_table_row* row) {
  return guarded([&] {
    need(r, "result");
    need(row, "row");
    ensure(index < r->comparison.size(), ErrorCode::OutOfRange, "row index out of range");
    const auto& c = r->comparison[index];
    fill_row(row, c.lambda, c.tau, c.test, c.rate, c.se, c.reps, c.m_draws, c.wall_ms);
  });
}

size_t br_sim_contingency_rows(const br_sim_result* r) {
  return r ? r->power.contingency.size() : 0;
}

size_t br_sim_strata(const br_sim_result* r) { return r ? r->n_strata : 0; }

br_status br_sim_contingency_row(const br_sim_result* r, size_t index, double* lambda,
                                 uint64_t* replication, uint64_t* n_treated,
                                 uint64_t* n_control, uint64_t* stratum_treated) {
  return guarded([&] {
    need(r, "result");
    ensure(index < r->power.contingency.size(), ErrorCode::OutOfRange,
           "row index out of range");
    const auto& c = r->power.contingency[index];
    if (lambda)
      *lambda = c.lambda;
    if (replication)
      *replication = c.replication;
    if (n_treated)
      *n_treated = c.n_treated;
    if (n_control)
      *n_control = c.n_control;
    if (stratum_treated)
      std::copy(c.stratum_treated.begin(), c.stratum_treated.end(), stratum_treated);
  });
}

void br_sim_result_destroy(br_sim_result* r) { delete r; }

} // extern "C"
