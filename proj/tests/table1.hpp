#pragma once

#include <cstdint>
#include <vector>

// The N = 10 worked example. y_obs_printed is rounded to two decimals;
// y_obs_unrounded carries the outcomes at full precision (Y(0) from
// R's set.seed(123); rnorm(10), effect 0.5, see data/ and tools/).
namespace table1 {

inline const std::vector<double> propensity{0.1, 0.2, 0.3, 0.4, 0.5,
                                            0.5, 0.6, 0.7, 0.8, 0.9};
inline const std::vector<std::uint8_t> w_obs{0, 1, 1, 0, 0, 1, 1, 1, 0, 1};
inline const std::vector<double> y_obs_printed{-0.56, 0.26, 2.06,  0.07,  0.13,
                                               2.22,  0.96, -0.77, -0.69, 0.05};
inline const std::vector<double> y0_unrounded{
    -0.5604756465522126, -0.23017748948328,   1.5587083141491243, 0.070508391424576,
    0.1292877351609463,  1.7150649868832817,  0.46091620598920247, -1.265061234606534,
    -0.686852851893526,  -0.4456619700999582};

inline std::vector<double> y_obs_unrounded() {
  std::vector<double> y(y0_unrounded);
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] += 0.5 * w_obs[i];
  return y;
}

} // namespace table1
