#pragma once

#include "bernrand/inference.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bernrand {

/// Grid lo, lo + step, ..., up to hi.
struct TauGrid {
  double lo = -3.0;
  double hi = 3.0;
  double step = 0.1;

  void validate() const;
  /// Grid values. When 1/step is an integer the points are computed as
  /// k / (1/step), so decimal grids land on the nearest doubles (-0.1, 2.4).
  std::vector<double> points() const;
};

struct CurvePoint {
  double tau;
  double p_value;
};

struct InversionResult {
  /// Extreme accepted grid values; empty when no tau has p > alpha.
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  double point_estimate = 0.0;
  double alpha = kDefaultAlpha;
  std::vector<CurvePoint> p_curve;
  bool contiguous = true;
  std::vector<std::string> diagnostics;
  Method method = Method::Exact;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
};

/// Inverts the family of additive sharp tests over one shared
/// randomization distribution.
InversionResult invert_test(const ObservedStudy& study, const TestStatistic& stat,
                            const RandomizationDistribution& distribution,
                            const TauGrid& grid, double alpha,
                            Sidedness sided = Sidedness::TwoSided,
                            const MonteCarloOptions& options = {});

InversionResult invert_test(const ObservedStudy& study, const TestStatistic& stat,
                            const SupportSpec& support, const TauGrid& grid,
                            double alpha, const EngineConfig& engine);

/// CI and point estimate recomputed from an existing curve at another alpha.
InversionResult summarize_curve(std::vector<CurvePoint> curve, double alpha);

} // namespace bernrand
