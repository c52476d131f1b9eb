#pragma once

// Brute-force reference computations. Written from the definitions with
// plain loops over all 2^N assignments; nothing here calls the library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

using Bitvec = std::vector<std::uint8_t>;

/// Assignment number `code` with unit 0 as the most significant bit, so
/// increasing codes follow lexicographic bitstring order.
inline Bitvec bits_of(std::uint64_t code, std::size_t n) {
  Bitvec w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = static_cast<std::uint8_t>((code >> (n - 1 - i)) & 1u);
  return w;
}

inline std::size_t ones(const Bitvec& w) {
  return static_cast<std::size_t>(std::accumulate(w.begin(), w.end(), 0));
}

inline double kernel(const std::vector<double>& e, const Bitvec& w) {
  double k = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i)
    k *= w[i] ? e[i] : 1.0 - e[i];
  return k;
}

/// P(sum W = k) by summing the kernel over every assignment.
inline double pmf(const std::vector<double>& e, std::size_t k) {
  const std::size_t n = e.size();
  long double total = 0.0L;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << n); ++c) {
    const Bitvec w = bits_of(c, n);
    if (ones(w) == k)
      total += kernel(e, w);
  }
  return static_cast<double>(total);
}

inline double mean_diff(const std::vector<double>& y, const Bitvec& w) {
  double st = 0, sc = 0;
  int nt = 0, nc = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (w[i]) {
      st += y[i];
      ++nt;
    } else {
      sc += y[i];
      ++nc;
    }
  }
  if (nt == 0 || nc == 0)
    return 0.0;
  return st / nt - sc / nc;
}

using Accept = std::function<bool(const Bitvec&)>;
enum class Side { Two, Upper, Lower };

/// Exact p-value of H0^tau by full enumeration: the statistic is computed
/// on the imputed outcomes minus tau (mean difference only), the support
/// is {w : accept(w)} and probabilities are kernels renormalized over it.
inline double p_value(const std::vector<double>& e, const Bitvec& w_obs,
                      const std::vector<double>& y_obs, const Accept& accept,
                      double tau = 0.0, Side side = Side::Two) {
  const std::size_t n = e.size();
  auto stat = [&](const Bitvec& w) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
      y[i] = y_obs[i] + tau * (double(w[i]) - double(w_obs[i]));
    return mean_diff(y, w) - tau;
  };
  const double t_obs = stat(w_obs);
  long double hit = 0.0L, total = 0.0L;
  for (std::uint64_t c = 0; c < (std::uint64_t{1} << n); ++c) {
    const Bitvec w = bits_of(c, n);
    if (!accept(w))
      continue;
    const double k = kernel(e, w);
    const double t = stat(w);
    // Relative slack only absorbs rounding from the different summation
    // order here; ties in exact arithmetic still count as extreme.
    const double slack = 1e-12 * (1.0 + std::fabs(t_obs));
    bool extreme = false;
    switch (side) {
    case Side::Two:
      extreme = std::fabs(t) >= std::fabs(t_obs) - slack;
      break;
    case Side::Upper:
      extreme = t >= t_obs - slack;
      break;
    case Side::Lower:
      extreme = t <= t_obs + slack;
      break;
    }
    total += k;
    if (extreme)
      hit += k;
  }
  return static_cast<double>(hit / total);
}

inline Accept nondegenerate(std::size_t n) {
  return [n](const Bitvec& w) { return ones(w) != 0 && ones(w) != n; };
}
inline Accept total_equals(std::size_t k) {
  return [k](const Bitvec& w) { return ones(w) == k; };
}

/// Chi-square statistic of observed counts against expected probabilities.
inline double chi_square(const std::vector<double>& counts, const std::vector<double>& probs,
                         double n) {
  double x2 = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = n * probs[i];
    x2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  return x2;
}

} // namespace oracle
