#include "bernrand/design.hpp"

#include "bernrand/detail/numeric.hpp"
#include "bernrand/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace bernrand {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t pow2_saturating(std::size_t n) {
  return n >= 64 ? kSaturated : (std::uint64_t{1} << n);
}

std::uint64_t binomial_saturating(std::size_t n, std::size_t k) {
  if (k > n)
    return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > kSaturated)
      return kSaturated;
  }
  return static_cast<std::uint64_t>(r);
}

void check_length(const PropensityDesign& design, std::size_t n) {
  ensure(n == design.n_units(), ErrorCode::LengthMismatch,
          "assignment has " + std::to_string(n) + " units but the design has " +
              std::to_string(design.n_units()));
}

[[noreturn]] void too_large(std::uint64_t cost, std::uint64_t limit) {
  fail(ErrorCode::TooLargeToEnumerate,
       "support too large to enumerate (" +
           (cost == kSaturated ? std::string(">= 2^64") : std::to_string(cost)) +
           " assignments, limit " + std::to_string(limit) +
           "); use the rejection or importance sampling engines");
}

bool is_degenerate(Bits w) {
  const auto ones = std::count(w.begin(), w.end(), std::uint8_t{1});
  return ones == 0 || static_cast<std::size_t>(ones) == w.size();
}

} // namespace

// ---------------------------------------------------------------------------
// Assignment

Assignment::Assignment(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (std::size_t i = 0; i < bits_.size(); ++i)
    ensure(bits_[i] <= 1, ErrorCode::InvalidArgument,
            "assignment bit " + std::to_string(i) + " is not 0 or 1");
}

Assignment Assignment::from_string(std::string_view text) {
  std::vector<std::uint8_t> bits;
  bits.reserve(text.size());
  for (char c : text) {
    ensure(c == '0' || c == '1', ErrorCode::InvalidArgument,
            "assignment string may only contain 0 and 1");
    bits.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return Assignment(std::move(bits));
}

std::size_t Assignment::treated_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::string Assignment::to_string() const { return bits_to_string(bits_); }

std::string bits_to_string(Bits bits) {
  std::string out(bits.size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    out[i] = bits[i] ? '1' : '0';
  return out;
}

// ---------------------------------------------------------------------------
// Covariates

void CovariateTable::add_column(std::string name, std::vector<CovariateValue> cells) {
  ensure(!find(name), ErrorCode::InvalidArgument,
          "duplicate covariate column '" + name + "'");
  if (names_.empty())
    rows_ = cells.size();
  ensure(cells.size() == rows_, ErrorCode::LengthMismatch,
          "covariate column '" + name + "' has " + std::to_string(cells.size()) +
              " rows, expected " + std::to_string(rows_));
  names_.push_back(std::move(name));
  cells_.push_back(std::move(cells));
}

std::optional<std::size_t> CovariateTable::find(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

const std::vector<CovariateValue>& CovariateTable::column(std::string_view name) const {
  const auto index = find(name);
  ensure(index.has_value(), ErrorCode::InvalidArgument,
          "no covariate column named '" + std::string(name) + "'");
  return cells_[*index];
}

bool covariate_matches(const CovariateValue& cell, std::string_view value) {
  if (const auto* text = std::get_if<std::string>(&cell))
    return *text == value;
  double parsed = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, parsed);
  return ec == std::errc{} && ptr == end && parsed == std::get<double>(cell);
}

// ---------------------------------------------------------------------------
// PropensityDesign

PropensityDesign::PropensityDesign(std::vector<double> propensities,
                                   std::optional<CovariateTable> covariates)
    : propensities_(std::move(propensities)), covariates_(std::move(covariates)) {
  ensure(!propensities_.empty(), ErrorCode::InvalidArgument,
          "design needs at least one unit");
  for (std::size_t i = 0; i < propensities_.size(); ++i) {
    const double e = propensities_[i];
    ensure(std::isfinite(e) && e > 0.0 && e < 1.0, ErrorCode::InvalidArgument,
            "propensity of unit " + std::to_string(i + 1) +
                " must lie strictly between 0 and 1");
  }
  log_treated_.reserve(propensities_.size());
  log_control_.reserve(propensities_.size());
  for (double e : propensities_) {
    log_treated_.push_back(std::log(e));
    log_control_.push_back(std::log1p(-e));
  }
  if (covariates_ && covariates_->columns() > 0)
    ensure(covariates_->rows() == propensities_.size(), ErrorCode::LengthMismatch,
            "covariate table has " + std::to_string(covariates_->rows()) +
                " rows but the design has " + std::to_string(propensities_.size()) +
                " units");
}

double PropensityDesign::kernel(Bits w) const {
  check_length(*this, w.size());
  double product = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    product *= w[i] ? propensities_[i] : 1.0 - propensities_[i];
  return product;
}

double PropensityDesign::log_kernel(Bits w) const {
  check_length(*this, w.size());
  detail::CompensatedSum sum;
  for (std::size_t i = 0; i < w.size(); ++i)
    sum += w[i] ? log_treated_[i] : log_control_[i];
  return sum.value();
}

// ---------------------------------------------------------------------------
// AcceptanceCriterion

AcceptanceCriterion AcceptanceCriterion::nondegenerate() {
  AcceptanceCriterion c;
  c.require("nondegenerate", [](Bits w, const CovariateTable*) {
    return !is_degenerate(w);
  });
  return c;
}

AcceptanceCriterion AcceptanceCriterion::fixed_total(std::size_t n_treated) {
  AcceptanceCriterion c;
  c.require_total(n_treated);
  return c;
}

AcceptanceCriterion& AcceptanceCriterion::require_total(std::size_t n_treated) {
  ensure(!total_ || *total_ == n_treated, ErrorCode::InvalidArgument,
          "conflicting total-treated clauses");
  total_ = n_treated;
  return *this;
}

AcceptanceCriterion& AcceptanceCriterion::require_stratum(std::string column,
                                                          std::string value,
                                                          std::size_t count) {
  ensure(!column.empty(), ErrorCode::InvalidArgument,
          "stratum clause needs a column name");
  strata_.push_back({std::move(column), std::move(value), count});
  return *this;
}

AcceptanceCriterion& AcceptanceCriterion::require(std::string name,
                                                  Predicate predicate) {
  ensure(static_cast<bool>(predicate), ErrorCode::InvalidArgument,
          "predicate '" + name + "' is empty");
  predicates_.push_back({std::move(name), std::move(predicate)});
  return *this;
}

BoundCriterion AcceptanceCriterion::bind(const PropensityDesign& design) const {
  BoundCriterion bound;
  bound.n_units_ = design.n_units();
  bound.total_ = total_;
  bound.predicates_ = predicates_;
  bound.covariates_ = design.covariates();
  for (const auto& clause : strata_) {
    const CovariateTable* table = design.covariates();
    std::optional<std::size_t> column;
    if (table) {
      column = table->find(clause.column);
      if (!column)
        column = table->find("x_" + clause.column);
    }
    ensure(column.has_value(), ErrorCode::InvalidArgument,
            "stratum clause refers to unknown covariate column '" +
                clause.column + "'");
    BoundCriterion::Group group{{}, clause.count};
    const auto& cells = table->column(*column);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (covariate_matches(cells[i], clause.value))
        group.units.push_back(i);
    bound.groups_.push_back(std::move(group));
  }
  return bound;
}

bool AcceptanceCriterion::accepts(const PropensityDesign& design, Bits w) const {
  check_length(design, w.size());
  return bind(design).accepts(w);
}

std::string AcceptanceCriterion::describe() const {
  std::string out;
  auto append = [&out](const std::string& clause) {
    if (!out.empty())
      out += " & ";
    out += clause;
  };
  if (total_)
    append("total=" + std::to_string(*total_));
  for (const auto& s : strata_)
    append(s.column + "=" + s.value + ":" + std::to_string(s.count));
  for (const auto& p : predicates_)
    append(p.name);
  return out.empty() ? "all" : out;
}

bool BoundCriterion::accepts(Bits w) const {
  if (total_) {
    std::size_t ones = 0;
    for (auto b : w)
      ones += b;
    if (ones != *total_)
      return false;
  }
  for (const auto& group : groups_) {
    std::size_t ones = 0;
    for (auto i : group.units)
      ones += w[i];
    if (ones != group.count)
      return false;
  }
  for (const auto& p : predicates_)
    if (!p.predicate(w, covariates_))
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// SupportSpec

AcceptanceCriterion SupportSpec::as_criterion() const {
  return std::visit(
      [](const auto& k) -> AcceptanceCriterion {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Full>)
          return AcceptanceCriterion::accept_all();
        else if constexpr (std::is_same_v<K, Nondegenerate>)
          return AcceptanceCriterion::nondegenerate();
        else if constexpr (std::is_same_v<K, FixedTotal>)
          return AcceptanceCriterion::fixed_total(k.n_treated);
        else
          return k.criterion;
      },
      kind_);
}

void SupportSpec::validate(std::size_t n_units) const {
  if (const auto* fixed = std::get_if<FixedTotal>(&kind_))
    ensure(fixed->n_treated >= 1 && fixed->n_treated + 1 <= n_units,
           ErrorCode::OutOfRange,
            "fixed total must satisfy 1 <= n_treated <= N-1 (got " +
                std::to_string(fixed->n_treated) + " with N=" +
                std::to_string(n_units) + ")");
}

std::string SupportSpec::name() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Full>)
          return "full";
        else if constexpr (std::is_same_v<K, Nondegenerate>)
          return "nondegenerate";
        else if constexpr (std::is_same_v<K, FixedTotal>)
          return "fixed-nt(" + std::to_string(k.n_treated) + ")";
        else
          return "criterion(" + k.criterion.describe() + ")";
      },
      kind_);
}

// ---------------------------------------------------------------------------
// ObservedStudy

ObservedStudy::ObservedStudy(PropensityDesign design, Assignment w_obs,
                             std::vector<double> y_obs)
    : design_(std::move(design)), w_obs_(std::move(w_obs)), y_obs_(std::move(y_obs)) {
  ensure(w_obs_.size() == design_.n_units() && y_obs_.size() == design_.n_units(),
          ErrorCode::LengthMismatch,
          "design, observed assignment and outcomes must have equal lengths (" +
              std::to_string(design_.n_units()) + ", " +
              std::to_string(w_obs_.size()) + ", " + std::to_string(y_obs_.size()) +
              ")");
  for (std::size_t i = 0; i < y_obs_.size(); ++i)
    ensure(std::isfinite(y_obs_[i]), ErrorCode::InvalidArgument,
            "outcome of unit " + std::to_string(i + 1) + " is not finite");
}

// ---------------------------------------------------------------------------
// Enumeration

std::uint64_t enumeration_cost(std::size_t n_units, const SupportSpec& support) {
  return std::visit(
      [n_units](const auto& k) -> std::uint64_t {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SupportSpec::FixedTotal>)
          return binomial_saturating(n_units, k.n_treated);
        else if constexpr (std::is_same_v<K, SupportSpec::Nondegenerate>) {
          const auto all = pow2_saturating(n_units);
          return all == kSaturated ? all : all - 2;
        } else
          return pow2_saturating(n_units);
      },
      support.kind());
}

namespace {

// Depth-first walk assigning 0 before 1 at each position, which yields
// lexicographic order with unit 1 as the most significant character.
class SupportWalker {
public:
  SupportWalker(const PropensityDesign& design, std::optional<std::size_t> fixed_total,
                const std::function<bool(Bits)>& leaf_filter,
                const std::function<void(Bits, double)>& visit)
      : e_(design.propensities()), n_(design.n_units()), fixed_total_(fixed_total),
        leaf_filter_(leaf_filter), visit_(visit), bits_(n_, 0), prefix_(n_ + 1, 1.0) {}

  void run() { descend(0, 0); }

private:
  void descend(std::size_t depth, std::size_t ones) {
    if (depth == n_) {
      if (!leaf_filter_ || leaf_filter_(bits_))
        visit_(bits_, prefix_[n_]);
      return;
    }
    const std::size_t remaining = n_ - depth;
    for (std::uint8_t bit : {std::uint8_t{0}, std::uint8_t{1}}) {
      const std::size_t next_ones = ones + bit;
      if (fixed_total_ &&
          (next_ones > *fixed_total_ || next_ones + (remaining - 1) < *fixed_total_))
        continue;
      bits_[depth] = bit;
      prefix_[depth + 1] = prefix_[depth] * (bit ? e_[depth] : 1.0 - e_[depth]);
      descend(depth + 1, next_ones);
    }
    bits_[depth] = 0;
  }

  std::span<const double> e_;
  std::size_t n_;
  std::optional<std::size_t> fixed_total_;
  const std::function<bool(Bits)>& leaf_filter_;
  const std::function<void(Bits, double)>& visit_;
  std::vector<std::uint8_t> bits_;
  std::vector<double> prefix_;
};

} // namespace

void for_each_in_support(const PropensityDesign& design, const SupportSpec& support,
                         std::uint64_t limit,
                         const std::function<void(Bits, double)>& visit) {
  support.validate(design.n_units());
  const std::uint64_t cost = enumeration_cost(design.n_units(), support);
  if (cost > limit)
    too_large(cost, limit);

  std::optional<std::size_t> fixed_total;
  std::function<bool(Bits)> filter;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SupportSpec::FixedTotal>)
          fixed_total = k.n_treated;
        else if constexpr (std::is_same_v<K, SupportSpec::Nondegenerate>)
          filter = [](Bits w) { return !is_degenerate(w); };
        else if constexpr (std::is_same_v<K, SupportSpec::Criterion>) {
          auto bound = std::make_shared<BoundCriterion>(k.criterion.bind(design));
          filter = [bound](Bits w) { return bound->accepts(w); };
        }
      },
      support.kind());
  SupportWalker(design, fixed_total, filter, visit).run();
}

std::vector<Assignment> enumerate_support(const PropensityDesign& design,
                                          const SupportSpec& support,
                                          std::uint64_t limit) {
  std::vector<Assignment> out;
  for_each_in_support(design, support, limit, [&out](Bits w, double) {
    out.emplace_back(std::vector<std::uint8_t>(w.begin(), w.end()));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Probabilities

double binomial_coefficient(std::size_t n, std::size_t k) {
  if (k > n)
    return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i)
    r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double poisson_binomial_pmf(std::span<const double> propensities, std::size_t k) {
  const std::size_t n = propensities.size();
  ensure(k <= n, ErrorCode::OutOfRange,
          "k=" + std::to_string(k) + " outside 0.." + std::to_string(n));
  std::vector<double> dp(k + 1, 0.0);
  dp[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = propensities[i];
    for (std::size_t j = std::min(i + 1, k); j >= 1; --j)
      dp[j] = dp[j] * (1.0 - p) + dp[j - 1] * p;
    dp[0] *= 1.0 - p;
  }
  return dp[k];
}

std::vector<double> poisson_binomial_distribution(std::span<const double> propensities) {
  const std::size_t n = propensities.size();
  std::vector<double> dp(n + 1, 0.0);
  dp[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = propensities[i];
    for (std::size_t j = i + 1; j >= 1; --j)
      dp[j] = dp[j] * (1.0 - p) + dp[j - 1] * p;
    dp[0] *= 1.0 - p;
  }
  return dp;
}

double assignment_probability(const PropensityDesign& design, const Assignment& w,
                              const SupportSpec& support, std::uint64_t limit) {
  check_length(design, w.size());
  support.validate(design.n_units());
  const std::size_t n = design.n_units();
  // Long designs go through logs so the kernel cannot underflow.
  const bool log_path = n > 64;

  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SupportSpec::Full>) {
          return log_path ? std::exp(design.log_kernel(w.bits())) : design.kernel(w.bits());
        } else if constexpr (std::is_same_v<K, SupportSpec::Nondegenerate>) {
          if (is_degenerate(w.bits()))
            return 0.0;
          double all_treated = 1.0, all_control = 1.0;
          for (double e : design.propensities()) {
            all_treated *= e;
            all_control *= 1.0 - e;
          }
          const double mass = 1.0 - all_treated - all_control;
          return log_path ? std::exp(design.log_kernel(w.bits()) - std::log(mass))
                          : design.kernel(w.bits()) / mass;
        } else if constexpr (std::is_same_v<K, SupportSpec::FixedTotal>) {
          if (w.treated_count() != k.n_treated)
            return 0.0;
          const double mass = poisson_binomial_pmf(design.propensities(), k.n_treated);
          return log_path ? std::exp(design.log_kernel(w.bits()) - std::log(mass))
                          : design.kernel(w.bits()) / mass;
        } else {
          const std::uint64_t cost = enumeration_cost(n, support);
          if (cost > limit)
            too_large(cost, limit);
          detail::CompensatedSum mass;
          for_each_in_support(design, support, limit,
                              [&mass](Bits, double kernel) { mass += kernel; });
          ensure(mass.value() > 0.0, ErrorCode::Unsatisfiable,
                 "no assignment satisfies the criterion");
          if (!k.criterion.bind(design).accepts(w.bits()))
            return 0.0;
          return design.kernel(w.bits()) / mass.value();
        }
      },
      support.kind());
}

TotalProbabilityEstimate estimate_total_probability(const PropensityDesign& design,
                                                    std::size_t n_treated,
                                                    std::size_t m_draws,
                                                    RngStream rng) {
  const std::size_t n = design.n_units();
  ensure(m_draws >= 1, ErrorCode::InvalidArgument, "m_draws must be at least 1");
  SupportSpec::fixed_total(n_treated).validate(n);

  std::vector<std::size_t> order(n);
  std::vector<std::uint8_t> bits(n);
  std::vector<double> kernels(m_draws);
  detail::CompensatedSum total;
  for (std::size_t m = 0; m < m_draws; ++m) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::fill(bits.begin(), bits.end(), std::uint8_t{0});
    for (std::size_t j = 0; j < n_treated; ++j) {
      std::swap(order[j], order[j + rng.below(n - j)]);
      bits[order[j]] = 1;
    }
    kernels[m] = design.kernel(bits);
    total += kernels[m];
  }
  const double mean = total.value() / static_cast<double>(m_draws);
  const double scale = binomial_coefficient(n, n_treated);

  double se = std::numeric_limits<double>::quiet_NaN();
  if (m_draws > 1) {
    detail::CompensatedSum squares;
    for (double k : kernels)
      squares += (k - mean) * (k - mean);
    const double variance = squares.value() / static_cast<double>(m_draws - 1);
    se = scale * std::sqrt(variance / static_cast<double>(m_draws));
  }
  return {scale * mean, se, m_draws};
}

} // namespace bernrand
