/*
 * bernrand: randomization inference for Bernoulli-trial experiments.
 *
 * Plain C interface to the C++ core. Objects are opaque handles created by
 * *_create functions and released by the matching *_destroy function.
 * Every fallible call returns a br_status; on failure br_last_error()
 * returns a message describing the most recent error on the calling thread.
 */
#ifndef BERNRAND_BERNRAND_H
#define BERNRAND_BERNRAND_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(BERNRAND_BUILDING_LIBRARY)
#    define BERNRAND_API __declspec(dllexport)
#  else
#    define BERNRAND_API __declspec(dllimport)
#  endif
#else
#  define BERNRAND_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum br_status {
  BR_OK = 0,
  BR_INVALID_ARGUMENT = 1,
  BR_LENGTH_MISMATCH = 2,
  BR_OUT_OF_RANGE = 3,
  BR_TOO_LARGE = 4,            /* support too large to enumerate */
  BR_BUDGET_EXHAUSTED = 5,     /* rejection sampler ran out of attempts */
  BR_UNSUPPORTED_CRITERION = 6,
  BR_UNSATISFIABLE = 7,
  BR_INTERNAL = 99
} br_status;

BERNRAND_API const char* br_last_error(void);
BERNRAND_API const char* br_status_name(br_status status);
BERNRAND_API const char* br_version(void);

/* ---- designs ----------------------------------------------------------- */

typedef struct br_design br_design;

/* Propensities must lie strictly inside (0, 1). */
BERNRAND_API br_status br_design_create(const double* propensities, size_t n_units,
                                        br_design** out);
BERNRAND_API br_status br_design_add_numeric_covariate(br_design* design, const char* name,
                                                       const double* values, size_t n);
BERNRAND_API br_status br_design_add_categorical_covariate(br_design* design,
                                                           const char* name,
                                                           const char* const* values,
                                                           size_t n);
BERNRAND_API size_t br_design_size(const br_design* design);
BERNRAND_API void br_design_destroy(br_design* design);

/* ---- acceptance criteria and supports ---------------------------------- */

typedef struct br_criterion br_criterion;

/* Returns nonzero to accept. bits holds n values of 0 or 1. */
typedef int (*br_predicate_fn)(const unsigned char* bits, size_t n, void* user_data);

BERNRAND_API br_status br_criterion_create(br_criterion** out);
BERNRAND_API br_status br_criterion_require_total(br_criterion* c, size_t n_treated);
BERNRAND_API br_status br_criterion_require_stratum(br_criterion* c, const char* column,
                                                    const char* value, size_t count);
BERNRAND_API br_status br_criterion_require_predicate(br_criterion* c, const char* name,
                                                      br_predicate_fn fn, void* user_data);
BERNRAND_API void br_criterion_destroy(br_criterion* c);

typedef enum br_support_kind {
  BR_SUPPORT_FULL = 0,
  BR_SUPPORT_NONDEGENERATE = 1,
  BR_SUPPORT_FIXED_TOTAL = 2,
  BR_SUPPORT_CRITERION = 3
} br_support_kind;

typedef struct br_support {
  br_support_kind kind;
  size_t n_treated;              /* BR_SUPPORT_FIXED_TOTAL */
  const br_criterion* criterion; /* BR_SUPPORT_CRITERION */
} br_support;

/* ---- design-level computations ----------------------------------------- */

/* An enumeration_limit of 0 selects the library default (2^22 support members). */

BERNRAND_API br_status br_assignment_probability(const br_design* design,
                                                 const unsigned char* w, size_t n,
                                                 const br_support* support,
                                                 uint64_t enumeration_limit, double* out);
BERNRAND_API br_status br_poisson_binomial_pmf(const double* propensities, size_t n,
                                               size_t k, double* out);
BERNRAND_API br_status br_estimate_total_probability(const br_design* design,
                                                     size_t n_treated, uint64_t m_draws,
                                                     uint64_t seed, double* estimate,
                                                     double* standard_error);

/* ---- studies and tests ------------------------------------------------- */

typedef struct br_study br_study;

/* The design is copied. */
BERNRAND_API br_status br_study_create(const br_design* design, const unsigned char* w_obs,
                                       const double* y_obs, size_t n, br_study** out);
BERNRAND_API size_t br_study_size(const br_study* study);
BERNRAND_API void br_study_destroy(br_study* study);

typedef enum br_method {
  BR_METHOD_EXACT = 0,
  BR_METHOD_REJECTION = 1,
  BR_METHOD_IMPORTANCE = 2
} br_method;

typedef enum br_sidedness {
  BR_TWO_SIDED = 0,
  BR_UPPER = 1, /* P(t >= t_obs) */
  BR_LOWER = 2  /* P(t <= t_obs) */
} br_sidedness;

typedef double (*br_statistic_fn)(const double* outcomes, const unsigned char* bits,
                                  size_t n, void* user_data);

/* A NULL statistic pointer, or one with fn == NULL, selects the built-in
 * difference in means. */
typedef struct br_statistic {
  const char* name;
  br_statistic_fn fn;
  void* user_data;
} br_statistic;

typedef struct br_engine {
  br_method method;
  br_sidedness sidedness;
  uint64_t draws;               /* Monte Carlo draws M */
  uint64_t seed;
  uint64_t stream;
  unsigned threads;             /* 0 = hardware concurrency */
  int add_one;                  /* (count+1)/(M+1) for rejection sampling */
  uint64_t attempt_factor;      /* rejection budget per accepted draw */
  uint64_t enumeration_limit;
} br_engine;

BERNRAND_API void br_engine_defaults(br_engine* engine);

typedef struct br_report {
  double p_value;
  br_method method;
  br_sidedness sidedness;
  uint64_t draws_used;
  double t_obs;
  int has_mc_standard_error;
  double mc_standard_error;
  int has_effective_sample_size;
  double effective_sample_size;
  int has_acceptance_rate;
  double acceptance_rate;
} br_report;

/* Tests H0: Y_i(1) = Y_i(0) + tau (tau = 0 is the sharp null). */
BERNRAND_API br_status br_test(const br_study* study, double tau, const br_support* support,
                               const br_statistic* statistic, const br_engine* engine,
                               br_report* out);

/* ---- test inversion ---------------------------------------------------- */

typedef struct br_inversion br_inversion;

BERNRAND_API br_status br_invert(const br_study* study, const br_support* support,
                                 const br_statistic* statistic, double tau_lo,
                                 double tau_hi, double tau_step, double alpha,
                                 const br_engine* engine, br_inversion** out);
/* Returns 1 and fills lo/hi when the accepted set is nonempty, else 0. */
BERNRAND_API int br_inversion_interval(const br_inversion* inv, double* lo, double* hi);
BERNRAND_API double br_inversion_point_estimate(const br_inversion* inv);
BERNRAND_API int br_inversion_contiguous(const br_inversion* inv);
BERNRAND_API size_t br_inversion_curve_size(const br_inversion* inv);
BERNRAND_API br_status br_inversion_curve_point(const br_inversion* inv, size_t index,
                                                double* tau, double* p_value);
BERNRAND_API uint64_t br_inversion_draws(const br_inversion* inv);
BERNRAND_API size_t br_inversion_diagnostic_count(const br_inversion* inv);
BERNRAND_API const char* br_inversion_diagnostic(const br_inversion* inv, size_t index);
BERNRAND_API void br_inversion_destroy(br_inversion* inv);

/* ---- enumeration ------------------------------------------------------- */

typedef struct br_enumeration br_enumeration;

/* Every support member with its probability and the statistic under H0^tau,
 * evaluated on the effect-removed outcomes y - tau w_obs. */
BERNRAND_API br_status br_enumerate(const br_study* study, const br_support* support,
                                    const br_statistic* statistic, double tau,
                                    uint64_t enumeration_limit, br_enumeration** out);
BERNRAND_API size_t br_enumeration_size(const br_enumeration* e);
BERNRAND_API size_t br_enumeration_units(const br_enumeration* e);
/* bits must hold br_enumeration_units() bytes. */
BERNRAND_API br_status br_enumeration_row(const br_enumeration* e, size_t index,
                                          unsigned char* bits, double* probability,
                                          double* statistic);
BERNRAND_API void br_enumeration_destroy(br_enumeration* e);

/* ---- simulation study -------------------------------------------------- */

typedef struct br_sim_config {
  size_t n_units;
  const size_t* stratum_sizes;
  size_t n_strata;
  const double* lambda_values;
  size_t n_lambda;
  const double* tau_values;
  size_t n_tau;
  size_t replications;
  double beta_a;
  double beta_b;
  double alpha;
  uint64_t m_draws;
  uint64_t attempt_factor;     /* rejection budget per accepted draw */
  uint64_t seed;
  unsigned threads;
  const uint64_t* is_m_values; /* proposals per importance-sampling arm */
  size_t n_is_m;
  int run_power;
  int run_comparison;
} br_sim_config;

/* Defaults point at static arrays owned by the library. */
BERNRAND_API void br_sim_config_defaults(br_sim_config* config);

typedef struct br_sim_result br_sim_result;

typedef struct br_table_row {
  double lambda;
  double tau;
  const char* test; /* valid while the result lives */
  double rate;
  double se;
  uint64_t reps;
  uint64_t m_draws;
  double wall_ms;   /* comparison rows only */
} br_table_row;

BERNRAND_API br_status br_simulate(const br_sim_config* config, br_sim_result** out);
BERNRAND_API size_t br_sim_power_rows(const br_sim_result* r);
BERNRAND_API br_status br_sim_power_row(const br_sim_result* r, size_t index,
                                        br_table_row* row);
BERNRAND_API size_t br_sim_comparison_rows(const br_sim_result* r);
BERNRAND_API br_status br_sim_comparison_row(const br_sim_result* r, size_t index,
                                             br_table_row* row);
BERNRAND_API size_t br_sim_contingency_rows(const br_sim_result* r);
BERNRAND_API size_t br_sim_strata(const br_sim_result* r);
/* stratum_treated must hold br_sim_strata() values. */
BERNRAND_API br_status br_sim_contingency_row(const br_sim_result* r, size_t index,
                                              double* lambda, uint64_t* replication,
                                              uint64_t* n_treated, uint64_t* n_control,
                                              uint64_t* stratum_treated);
BERNRAND_API void br_sim_result_destroy(br_sim_result* r);

#ifdef __cplusplus
}
#endif

#endif /* BERNRAND_BERNRAND_H */
