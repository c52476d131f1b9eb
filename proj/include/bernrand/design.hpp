#pragma once

#include "bernrand/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bernrand {

/// Exact engines refuse supports with more candidate assignments than this.
inline constexpr std::uint64_t kDefaultEnumerationLimit = std::uint64_t{1} << 22;

using Bits = std::span<const std::uint8_t>;

/// One realization of the assignment mechanism: bit i is 1 when unit i is
/// treated.
class Assignment {
public:
  Assignment() = default;
  explicit Assignment(std::vector<std::uint8_t> bits);

  /// Parses a bitstring such as "0110"; the first character is unit 1.
  static Assignment from_string(std::string_view text);

  std::size_t size() const noexcept { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  Bits bits() const noexcept { return bits_; }
  std::size_t treated_count() const noexcept;
  std::string to_string() const;

  friend bool operator==(const Assignment&, const Assignment&) = default;
  friend auto operator<=>(const Assignment&, const Assignment&) = default;

private:
  std::vector<std::uint8_t> bits_;
};

std::string bits_to_string(Bits bits);

using CovariateValue = std::variant<double, std::string>;

/// Column-named covariate table with one row per unit.
class CovariateTable {
public:
  void add_column(std::string name, std::vector<CovariateValue> cells);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t columns() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> find(std::string_view name) const;
  const std::vector<CovariateValue>& column(std::size_t index) const {
    return cells_.at(index);
  }
  const std::vector<CovariateValue>& column(std::string_view name) const;

private:
  std::size_t rows_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<CovariateValue>> cells_;
};

/// Numeric cells match a value that parses to the same number; categorical
/// cells match by exact text.
bool covariate_matches(const CovariateValue& cell, std::string_view value);

/// The known design: independent Bernoulli trials with unit propensities
/// strictly inside (0, 1), plus optional covariates.
class PropensityDesign {
public:
  explicit PropensityDesign(std::vector<double> propensities,
                            std::optional<CovariateTable> covariates = {});

  std::size_t n_units() const noexcept { return propensities_.size(); }
  std::span<const double> propensities() const noexcept { return propensities_; }
  const CovariateTable* covariates() const noexcept {
    return covariates_ ? &*covariates_ : nullptr;
  }

  /// prod e^w (1-e)^(1-w), computed as a single running product.
  double kernel(Bits w) const;
  double log_kernel(Bits w) const;

private:
  std::vector<double> propensities_;
  std::vector<double> log_treated_; // log e
  std::vector<double> log_control_; // log (1 - e)
  std::optional<CovariateTable> covariates_;
};

class BoundCriterion;

/// Acceptance rule phi(w, X): a conjunction of clauses. Count clauses fix
/// the number of treated units overall or inside a covariate stratum; named
/// predicates hold arbitrary user logic.
class AcceptanceCriterion {
public:
  using Predicate = std::function<bool(Bits, const CovariateTable*)>;

  struct StratumCount {
    std::string column;
    std::string value;
    std::size_t count;
  };
  struct NamedPredicate {
    std::string name;
    Predicate predicate;
  };

  static AcceptanceCriterion accept_all() { return {}; }
  static AcceptanceCriterion nondegenerate();
  static AcceptanceCriterion fixed_total(std::size_t n_treated);

  AcceptanceCriterion& require_total(std::size_t n_treated);
  AcceptanceCriterion& require_stratum(std::string column, std::string value,
                                       std::size_t count);
  AcceptanceCriterion& require(std::string name, Predicate predicate);

  const std::optional<std::size_t>& total() const noexcept { return total_; }
  const std::vector<StratumCount>& strata() const noexcept { return strata_; }
  const std::vector<NamedPredicate>& predicates() const noexcept {
    return predicates_;
  }

  /// True when only count clauses are present.
  bool count_structured() const noexcept { return predicates_.empty(); }

  /// Resolves stratum columns against the design's covariates.
  BoundCriterion bind(const PropensityDesign& design) const;

  bool accepts(const PropensityDesign& design, Bits w) const;

  std::string describe() const;

private:
  std::optional<std::size_t> total_;
  std::vector<StratumCount> strata_;
  std::vector<NamedPredicate> predicates_;
};

/// A criterion resolved to unit indices for one design; cheap to evaluate in
/// sampling loops.
class BoundCriterion {
public:
  struct Group {
    std::vector<std::size_t> units;
    std::size_t count;
  };

  bool accepts(Bits w) const;

  std::size_t n_units() const noexcept { return n_units_; }
  const std::optional<std::size_t>& total() const noexcept { return total_; }
  const std::vector<Group>& groups() const noexcept { return groups_; }
  bool count_structured() const noexcept { return predicates_.empty(); }
  bool accepts_everything() const noexcept {
    return !total_ && groups_.empty() && predicates_.empty();
  }

private:
  friend class AcceptanceCriterion;

  std::size_t n_units_ = 0;
  std::optional<std::size_t> total_;
  std::vector<Group> groups_;
  std::vector<AcceptanceCriterion::NamedPredicate> predicates_;
  const CovariateTable* covariates_ = nullptr;
};

/// Declares the assignment support W+.
class SupportSpec {
public:
  struct Full {};
  struct Nondegenerate {};
  struct FixedTotal {
    std::size_t n_treated;
  };
  struct Criterion {
    AcceptanceCriterion criterion;
  };
  using Kind = std::variant<Full, Nondegenerate, FixedTotal, Criterion>;

  static SupportSpec full() { return SupportSpec{Full{}}; }
  static SupportSpec nondegenerate() { return SupportSpec{Nondegenerate{}}; }
  static SupportSpec fixed_total(std::size_t n_treated) {
    return SupportSpec{FixedTotal{n_treated}};
  }
  static SupportSpec criterion(AcceptanceCriterion c) {
    return SupportSpec{Criterion{std::move(c)}};
  }

  const Kind& kind() const noexcept { return kind_; }

  /// The equivalent acceptance criterion (Full accepts everything).
  AcceptanceCriterion as_criterion() const;

  /// Throws when the support is malformed for a design of n_units.
  void validate(std::size_t n_units) const;

  std::string name() const;

private:
  explicit SupportSpec(Kind kind) : kind_(std::move(kind)) {}
  Kind kind_;
};

/// Observed data: the design, the realized assignment and the outcomes.
class ObservedStudy {
public:
  ObservedStudy(PropensityDesign design, Assignment w_obs,
                std::vector<double> y_obs);

  const PropensityDesign& design() const noexcept { return design_; }
  const Assignment& w_obs() const noexcept { return w_obs_; }
  std::span<const double> y_obs() const noexcept { return y_obs_; }
  std::size_t n_units() const noexcept { return y_obs_.size(); }

private:
  PropensityDesign design_;
  Assignment w_obs_;
  std::vector<double> y_obs_;
};

/// P(W = w) normalized over the support; 0 when w lies outside it.
double assignment_probability(const PropensityDesign& design,
                              const Assignment& w, const SupportSpec& support,
                              std::uint64_t limit = kDefaultEnumerationLimit);

/// Number of assignments the enumerator has to visit, saturating at
/// UINT64_MAX. For Criterion supports this is 2^N (all candidates).
std::uint64_t enumeration_cost(std::size_t n_units, const SupportSpec& support);

/// Visits every assignment of the support in lexicographic bit order with its
/// unnormalized kernel. Throws TooLargeToEnumerate when the cost exceeds limit.
void for_each_in_support(const PropensityDesign& design,
                         const SupportSpec& support, std::uint64_t limit,
                         const std::function<void(Bits, double)>& visit);

std::vector<Assignment>
enumerate_support(const PropensityDesign& design, const SupportSpec& support,
                  std::uint64_t limit = kDefaultEnumerationLimit);

/// P(sum W_i = k) for independent Bernoulli(p_i), by the O(N k) recurrence.
double poisson_binomial_pmf(std::span<const double> propensities, std::size_t k);

/// The whole pmf, k = 0..N.
std::vector<double> poisson_binomial_distribution(std::span<const double> propensities);

struct TotalProbabilityEstimate {
  double estimate;
  double standard_error; ///< NaN when m_draws == 1
  std::size_t draws;
};

/// Survey-sampling estimate of P(sum W = n_treated): draw m assignments
/// uniformly with n_treated ones and scale the mean kernel by C(N, n_treated).
TotalProbabilityEstimate estimate_total_probability(const PropensityDesign& design,
                                                    std::size_t n_treated,
                                                    std::size_t m_draws,
                                                    RngStream rng);

/// Binomial coefficient as a double (exact while representable).
double binomial_coefficient(std::size_t n, std::size_t k);

} // namespace bernrand
