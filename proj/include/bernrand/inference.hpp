#pragma once

#include "bernrand/design.hpp"
#include "bernrand/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bernrand {

enum class Sidedness { TwoSided, Upper, Lower };
enum class Method { Exact, RejectionSampling, ImportanceSampling };

std::string_view to_string(Sidedness s);
std::string_view to_string(Method m);

/// H0^tau: Y_i(1) = Y_i(0) + tau for every unit. tau = 0 is the sharp null
/// of no effect. Heterogeneous sharp nulls would subclass the imputation.
struct SharpHypothesis {
  double tau = 0.0;
};

/// Y_i(w_i) = y_i + tau (w_i - w_obs_i).
std::vector<double> impute_outcomes(const ObservedStudy& study,
                                    const SharpHypothesis& hyp, Bits w);
void impute_outcomes_into(const ObservedStudy& study, const SharpHypothesis& hyp,
                          Bits w, std::span<double> out);

/// Y(w) - tau w, which equals y - tau w_obs for every w: the control
/// outcomes implied by H0^tau. The engines evaluate the statistic on these,
/// so the mean difference is compared as t(Y(w), w) - tau. At tau = 0 this
/// is the observed outcome vector.
std::vector<double> effect_removed_outcomes(const ObservedStudy& study,
                                            const SharpHypothesis& hyp);

/// Treated mean minus control mean; 0 when either group is empty.
double mean_difference(std::span<const double> outcomes, Bits w);

/// A named statistic t(Y(w), w).
class TestStatistic {
public:
  using Fn = std::function<double(std::span<const double>, Bits)>;

  TestStatistic(std::string name, Fn fn);
  static TestStatistic mean_difference();

  const std::string& name() const noexcept { return name_; }
  double operator()(std::span<const double> outcomes, Bits w) const {
    return fn_(outcomes, w);
  }

private:
  std::string name_;
  Fn fn_;
};

class StatisticRegistry {
public:
  /// Registry holding the built-in "mean-diff".
  static StatisticRegistry with_builtins();

  void add(TestStatistic statistic);
  const TestStatistic& get(std::string_view name) const;
  std::vector<std::string> names() const;

private:
  std::map<std::string, TestStatistic, std::less<>> entries_;
};

struct PValueReport {
  double p_value = 1.0;
  Method method = Method::Exact;
  std::size_t draws_used = 0;
  std::optional<double> mc_standard_error;
  std::optional<double> effective_sample_size;
  std::optional<double> acceptance_rate;
  Sidedness sidedness = Sidedness::TwoSided;
  /// Observed statistic on the effect-removed outcomes.
  double t_obs = 0.0;
};

struct MonteCarloOptions {
  /// Report (count + 1) / (M + 1) for rejection sampling.
  bool add_one = false;
  /// 0 means one worker per hardware thread. Results do not depend on it.
  unsigned threads = 1;
  /// Rejection budget per accepted draw.
  std::size_t attempt_factor = 1000;
  /// Draws per RNG substream.
  std::size_t block_size = 4096;
};

/// A set of assignments with weights representing the randomization
/// distribution of one engine: every support member with its probability
/// (exact), accepted rejection draws with unit weight, or uniform proposals
/// with kernel weights (importance). Reusing one set across hypotheses keeps
/// a p-value curve free of grid-to-grid Monte Carlo noise.
class RandomizationDistribution {
public:
  static RandomizationDistribution exact(const PropensityDesign& design,
                                         const SupportSpec& support,
                                         std::uint64_t limit = kDefaultEnumerationLimit);

  static RandomizationDistribution rejection(const PropensityDesign& design,
                                             const AcceptanceCriterion& criterion,
                                             std::size_t m_draws, const RngStream& rng,
                                             const MonteCarloOptions& options = {});

  static RandomizationDistribution importance(const PropensityDesign& design,
                                              const AcceptanceCriterion& criterion,
                                              const Assignment& w_obs,
                                              std::size_t m_draws, const RngStream& rng,
                                              const MonteCarloOptions& options = {});

  Method method() const noexcept { return method_; }
  std::size_t size() const noexcept { return weights_.size(); }
  std::size_t n_units() const noexcept { return n_units_; }
  Bits draw(std::size_t i) const {
    return Bits(bits_).subspan(i * n_units_, n_units_);
  }
  /// Probability (exact), 1 (rejection) or kernel relative to the largest
  /// kernel in the set (importance).
  double weight(std::size_t i) const { return weights_[i]; }
  std::optional<double> acceptance_rate() const noexcept { return acceptance_rate_; }
  std::optional<double> effective_sample_size() const noexcept { return ess_; }

  PValueReport p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                       const TestStatistic& stat, Sidedness sided,
                       const MonteCarloOptions& options = {}) const;

private:
  Method method_ = Method::Exact;
  std::size_t n_units_ = 0;
  std::vector<std::uint8_t> bits_;
  std::vector<double> weights_;
  std::optional<double> acceptance_rate_;
  std::optional<double> ess_;
};

PValueReport exact_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                           const TestStatistic& stat, const SupportSpec& support,
                           Sidedness sided = Sidedness::TwoSided,
                           std::uint64_t limit = kDefaultEnumerationLimit);

PValueReport rejection_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                               const TestStatistic& stat,
                               const AcceptanceCriterion& criterion,
                               std::size_t m_draws, const RngStream& rng,
                               Sidedness sided = Sidedness::TwoSided,
                               const MonteCarloOptions& options = {});

PValueReport importance_p_value(const ObservedStudy& study, const SharpHypothesis& hyp,
                                const TestStatistic& stat,
                                const AcceptanceCriterion& criterion,
                                std::size_t m_draws, const RngStream& rng,
                                Sidedness sided = Sidedness::TwoSided,
                                const MonteCarloOptions& options = {});

inline constexpr std::size_t kDefaultDraws = 10000;
inline constexpr double kDefaultAlpha = 0.05;

/// Engine selection shared by the test and inversion entry points.
struct EngineConfig {
  Method method = Method::Exact;
  Sidedness sided = Sidedness::TwoSided;
  std::size_t draws = kDefaultDraws;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  MonteCarloOptions mc;
  std::uint64_t enumeration_limit = kDefaultEnumerationLimit;
};

RandomizationDistribution build_distribution(const ObservedStudy& study,
                                             const SupportSpec& support,
                                             const EngineConfig& engine);

PValueReport run_test(const ObservedStudy& study, const SharpHypothesis& hyp,
                      const TestStatistic& stat, const SupportSpec& support,
                      const EngineConfig& engine);

} // namespace bernrand
