#include "bernrand/samplers.hpp"

#include "bernrand/error.hpp"

#include <algorithm>
#include <cmath>

namespace bernrand {

CoinFlipper::CoinFlipper(std::span<const double> propensities) {
  thresholds_.reserve(propensities.size());
  for (double e : propensities) {
    const double scaled = std::round(e * 0x1.0p32);
    thresholds_.push_back(static_cast<std::uint32_t>(
        std::clamp(scaled, 1.0, static_cast<double>(RngStream::max()))));
  }
}

void CoinFlipper::fill(RngStream& rng, std::span<std::uint8_t> out) const {
  ensure(out.size() == thresholds_.size(), ErrorCode::LengthMismatch,
         "coin buffer length does not match the design");
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = rng() < thresholds_[i] ? 1 : 0;
}

Assignment bernoulli_draw(const PropensityDesign& design, RngStream& rng) {
  std::vector<std::uint8_t> bits(design.n_units());
  CoinFlipper(design.propensities()).fill(rng, bits);
  return Assignment(std::move(bits));
}

DrawBudget DrawBudget::for_target(std::size_t target_accepts,
                                  std::size_t attempt_factor) {
  return {target_accepts * attempt_factor, target_accepts};
}

void DrawBudget::validate() const {
  ensure(target_accepts >= 1 && max_attempts >= target_accepts,
         ErrorCode::InvalidArgument,
         "draw budget needs max_attempts >= target_accepts >= 1");
}

namespace {

// Coin order for one attempt: the units of each disjoint count group, each
// followed by a checkpoint on that group's count, then everything else. An
// attempt that misses a checkpoint is abandoned without flipping the rest;
// the next attempt starts on fresh words, so accepted draws keep the
// conditional distribution.
struct FlipPlan {
  std::vector<std::size_t> order;
  std::vector<std::pair<std::size_t, std::size_t>> checkpoints; // (end, count)
};

FlipPlan make_plan(const BoundCriterion& criterion, std::size_t n) {
  FlipPlan plan;
  std::vector<std::uint8_t> placed(n, 0);
  for (const auto& group : criterion.groups()) {
    const bool disjoint = std::none_of(group.units.begin(), group.units.end(),
                                       [&](std::size_t u) { return placed[u] != 0; });
    if (!disjoint)
      continue;
    for (auto u : group.units) {
      plan.order.push_back(u);
      placed[u] = 1;
    }
    plan.checkpoints.emplace_back(plan.order.size(), group.count);
  }
  for (std::size_t u = 0; u < n; ++u)
    if (!placed[u])
      plan.order.push_back(u);
  return plan;
}

} // namespace

std::size_t rejection_fill(const CoinFlipper& coins, const BoundCriterion& criterion,
                           std::size_t target, std::size_t max_attempts,
                           RngStream& rng, std::span<std::uint8_t> out) {
  const std::size_t n = coins.n_units();
  ensure(out.size() == target * n, ErrorCode::LengthMismatch,
         "rejection buffer has the wrong size");
  const FlipPlan plan = make_plan(criterion, n);
  std::size_t accepted = 0;
  std::size_t attempts = 0;
  while (accepted < target) {
    if (attempts == max_attempts)
      throw BudgetExhaustedError(
          accepted, attempts,
          "rejection sampling budget exhausted: " + std::to_string(accepted) +
              " of " + std::to_string(target) + " draws accepted after " +
              std::to_string(attempts) + " attempts; the criterion may be too "
              "stringent or unsatisfiable");
    auto slot = out.subspan(accepted * n, n);
    ++attempts;
    std::size_t pos = 0;
    bool alive = true;
    for (const auto& [end, count] : plan.checkpoints) {
      std::size_t ones = 0;
      for (; pos < end; ++pos) {
        const std::size_t u = plan.order[pos];
        slot[u] = coins.flip(rng, u);
        ones += slot[u];
      }
      if (ones != count) {
        alive = false;
        break;
      }
    }
    if (!alive)
      continue;
    for (; pos < n; ++pos) {
      const std::size_t u = plan.order[pos];
      slot[u] = coins.flip(rng, u);
    }
    if (criterion.accepts(slot))
      ++accepted;
  }
  return attempts;
}

RejectionSample rejection_sample(const PropensityDesign& design,
                                 const AcceptanceCriterion& criterion,
                                 const DrawBudget& budget, RngStream& rng) {
  budget.validate();
  const std::size_t n = design.n_units();
  const CoinFlipper coins(design.propensities());
  const BoundCriterion bound = criterion.bind(design);
  std::vector<std::uint8_t> flat(budget.target_accepts * n);
  RejectionSample out;
  out.attempts = rejection_fill(coins, bound, budget.target_accepts,
                                budget.max_attempts, rng, flat);
  out.acceptance_rate = static_cast<double>(budget.target_accepts) /
                        static_cast<double>(out.attempts);
  out.draws.reserve(budget.target_accepts);
  for (std::size_t m = 0; m < budget.target_accepts; ++m)
    out.draws.emplace_back(std::vector<std::uint8_t>(
        flat.begin() + static_cast<std::ptrdiff_t>(m * n),
        flat.begin() + static_cast<std::ptrdiff_t>((m + 1) * n)));
  return out;
}

// ---------------------------------------------------------------------------

UniformConditionalProposal::UniformConditionalProposal(
    const PropensityDesign& design, const AcceptanceCriterion& criterion,
    const Assignment& w_obs)
    : w_obs_(w_obs.bits().begin(), w_obs.bits().end()) {
  const std::size_t n = design.n_units();
  ensure(w_obs.size() == n, ErrorCode::LengthMismatch,
         "observed assignment length does not match the design");
  ensure(criterion.count_structured(), ErrorCode::UnsupportedCriterion,
         "uniform proposals need a criterion made only of treated-count clauses; "
         "'" + criterion.describe() + "' has named predicates");
  const BoundCriterion bound = criterion.bind(design);

  std::vector<std::uint8_t> owner(n, 0);
  for (const auto& group : bound.groups()) {
    for (auto i : group.units) {
      ensure(owner[i] == 0, ErrorCode::UnsupportedCriterion,
             "uniform proposals need disjoint strata; unit " + std::to_string(i + 1) +
                 " falls in more than one stratum clause");
      owner[i] = 1;
    }
    if (!group.units.empty())
      blocks_.push_back({group.units, 0});
  }
  ensure(bound.accepts(w_obs.bits()), ErrorCode::InvalidArgument,
         "observed assignment does not satisfy the criterion '" +
             criterion.describe() + "'");

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < n; ++i)
    if (!owner[i])
      rest.push_back(i);
  if (bound.total()) {
    if (!rest.empty())
      blocks_.push_back({std::move(rest), 0});
  } else {
    free_units_ = std::move(rest);
  }

  for (auto& block : blocks_) {
    for (auto i : block.units)
      block.ones += w_obs_[i];
    const double size = static_cast<double>(block.units.size());
    const double ones = static_cast<double>(block.ones);
    log_support_size_ +=
        std::lgamma(size + 1.0) - std::lgamma(ones + 1.0) - std::lgamma(size - ones + 1.0);
  }
  log_support_size_ += static_cast<double>(free_units_.size()) * std::log(2.0);
}

void UniformConditionalProposal::fill(RngStream& rng, std::span<std::uint8_t> out) const {
  ensure(out.size() == w_obs_.size(), ErrorCode::LengthMismatch,
         "proposal buffer length does not match the design");
  std::copy(w_obs_.begin(), w_obs_.end(), out.begin());
  // Partial Fisher-Yates: pick the smaller of the treated and control sets.
  thread_local std::vector<std::size_t> scratch;
  for (const auto& block : blocks_) {
    const std::size_t size = block.units.size();
    const bool pick_treated = 2 * block.ones <= size;
    const std::size_t picks = pick_treated ? block.ones : size - block.ones;
    const std::uint8_t picked = pick_treated ? 1 : 0;
    scratch.assign(block.units.begin(), block.units.end());
    for (auto i : scratch)
      out[i] = 1 - picked;
    for (std::size_t j = 0; j < picks; ++j) {
      std::swap(scratch[j], scratch[j + rng.below(size - j)]);
      out[scratch[j]] = picked;
    }
  }
  for (auto i : free_units_)
    out[i] = static_cast<std::uint8_t>(rng() >> 31);
}

Assignment UniformConditionalProposal::draw(RngStream& rng) const {
  std::vector<std::uint8_t> bits(w_obs_.size());
  fill(rng, bits);
  return Assignment(std::move(bits));
}

Assignment uniform_conditional_proposal(const PropensityDesign& design,
                                        const AcceptanceCriterion& criterion,
                                        const Assignment& w_obs, RngStream& rng) {
  return UniformConditionalProposal(design, criterion, w_obs).draw(rng);
}

} // namespace bernrand
