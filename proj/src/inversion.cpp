#include "bernrand/inversion.hpp"

#include "bernrand/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bernrand {

void TauGrid::validate() const {
  ensure(std::isfinite(lo) && std::isfinite(hi) && std::isfinite(step),
         ErrorCode::InvalidArgument, "tau grid values must be finite");
  ensure(lo <= hi, ErrorCode::InvalidArgument, "tau grid needs lo <= hi");
  ensure(step > 0.0, ErrorCode::InvalidArgument, "tau grid step must be positive");
}

std::vector<double> TauGrid::points() const {
  validate();
  constexpr double kSlack = 1e-9;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + kSlack)) + 1;
  std::vector<double> out;
  out.reserve(count);

  const double inverse = 1.0 / step;
  const double inverse_int = std::round(inverse);
  const double offset = lo * inverse_int;
  const bool decimal = inverse_int >= 1.0 &&
                       std::fabs(inverse - inverse_int) < kSlack * inverse_int &&
                       std::fabs(offset - std::round(offset)) < 1e-6;
  for (std::size_t i = 0; i < count; ++i) {
    if (decimal)
      out.push_back((std::round(offset) + static_cast<double>(i)) / inverse_int);
    else
      out.push_back(lo + static_cast<double>(i) * step);
  }
  return out;
}

InversionResult summarize_curve(std::vector<CurvePoint> curve, double alpha) {
  ensure(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument,
         "alpha must lie in (0, 1)");
  ensure(!curve.empty(), ErrorCode::InvalidArgument, "the p-value curve is empty");
  InversionResult result;
  result.alpha = alpha;
  result.p_curve = std::move(curve);
  const auto& pc = result.p_curve;

  std::optional<std::size_t> first, last;
  std::size_t accepted = 0;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pc[i].p_value > alpha) {
      if (!first)
        first = i;
      last = i;
      ++accepted;
    }
  }
  if (first) {
    result.ci_lo = pc[*first].tau;
    result.ci_hi = pc[*last].tau;
    result.contiguous = accepted == *last - *first + 1;
    if (!result.contiguous) {
      std::ostringstream msg;
      msg << "accepted set is not contiguous (" << accepted << " accepted grid points "
          << "between " << pc[*first].tau << " and " << pc[*last].tau
          << "); reporting the convex hull";
      result.diagnostics.push_back(msg.str());
    }
  } else {
    result.diagnostics.push_back("no tau on the grid has p-value above alpha; "
                                 "confidence interval is empty");
  }

  double best = -1.0;
  for (const auto& point : pc)
    best = std::max(best, point.p_value);
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (const auto& point : pc) {
    if (point.p_value == best) {
      if (!seen)
        lo = point.tau;
      hi = point.tau;
      seen = true;
    }
  }
  result.point_estimate = lo == hi ? lo : 0.5 * (lo + hi);
  return result;
}

InversionResult invert_test(const ObservedStudy& study, const TestStatistic& stat,
                            const RandomizationDistribution& distribution,
                            const TauGrid& grid, double alpha, Sidedness sided,
                            const MonteCarloOptions& options) {
  const std::vector<double> taus = grid.points();
  std::vector<CurvePoint> curve;
  curve.reserve(taus.size());
  for (double tau : taus) {
    const PValueReport report =
        distribution.p_value(study, SharpHypothesis{tau}, stat, sided, options);
    curve.push_back({tau, report.p_value});
  }
  InversionResult result = summarize_curve(std::move(curve), alpha);
  result.method = distribution.method();
  result.draws = distribution.size();
  return result;
}

InversionResult invert_test(const ObservedStudy& study, const TestStatistic& stat,
                            const SupportSpec& support, const TauGrid& grid,
                            double alpha, const EngineConfig& engine) {
  grid.validate();
  const RandomizationDistribution distribution =
      build_distribution(study, support, engine);
  InversionResult result =
      invert_test(study, stat, distribution, grid, alpha, engine.sided, engine.mc);
  result.seed = engine.seed;
  return result;
}

} // namespace bernrand
