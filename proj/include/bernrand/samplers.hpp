#pragma once

#include "bernrand/design.hpp"
#include "bernrand/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bernrand {

/// Flips one biased coin per unit. Each propensity is stored as a 32-bit
/// threshold, so a unit is treated with probability round(e * 2^32) / 2^32,
/// within 2^-33 of e.
class CoinFlipper {
public:
  explicit CoinFlipper(std::span<const double> propensities);

  std::size_t n_units() const noexcept { return thresholds_.size(); }
  void fill(RngStream& rng, std::span<std::uint8_t> out) const;
  std::uint8_t flip(RngStream& rng, std::size_t unit) const noexcept {
    return rng() < thresholds_[unit] ? 1 : 0;
  }

private:
  std::vector<std::uint32_t> thresholds_;
};

Assignment bernoulli_draw(const PropensityDesign& design, RngStream& rng);

struct DrawBudget {
  std::size_t max_attempts;
  std::size_t target_accepts;

  static constexpr std::size_t kDefaultAttemptFactor = 1000;

  static DrawBudget for_target(std::size_t target_accepts,
                               std::size_t attempt_factor = kDefaultAttemptFactor);
  void validate() const;
};

struct RejectionSample {
  std::vector<Assignment> draws;
  std::size_t attempts = 0;
  double acceptance_rate = 0.0;
};

/// i.i.d. draws from P(W | phi(W, X) = 1): unconditional draws that fail
/// the criterion are discarded. Throws BudgetExhaustedError when
/// max_attempts is reached first.
RejectionSample rejection_sample(const PropensityDesign& design,
                                 const AcceptanceCriterion& criterion,
                                 const DrawBudget& budget, RngStream& rng);

/// Flat-buffer form used by the p-value engines: writes `target` accepted
/// draws of n_units bits each into `out` and returns the attempts used.
std::size_t rejection_fill(const CoinFlipper& coins, const BoundCriterion& criterion,
                           std::size_t target, std::size_t max_attempts,
                           RngStream& rng, std::span<std::uint8_t> out);

/// Uniform proposal over the acceptable set of a count-structured criterion.
///
/// Each constrained stratum gets a uniformly chosen subset of the observed
/// size. Units outside every stratum form one more such block when a total
/// clause is present (their count is then implied) and get fair coins
/// otherwise. Blocks are drawn in clause-declaration order, the remainder last.
class UniformConditionalProposal {
public:
  UniformConditionalProposal(const PropensityDesign& design,
                             const AcceptanceCriterion& criterion,
                             const Assignment& w_obs);

  void fill(RngStream& rng, std::span<std::uint8_t> out) const;
  Assignment draw(RngStream& rng) const;

  /// log of the number of acceptable assignments.
  double log_support_size() const noexcept { return log_support_size_; }

private:
  std::vector<std::uint8_t> w_obs_;
  struct Block {
    std::vector<std::size_t> units;
    std::size_t ones;
  };
  std::vector<Block> blocks_;
  std::vector<std::size_t> free_units_;
  double log_support_size_ = 0.0;
};

Assignment uniform_conditional_proposal(const PropensityDesign& design,
                                        const AcceptanceCriterion& criterion,
                                        const Assignment& w_obs, RngStream& rng);

} // namespace bernrand
