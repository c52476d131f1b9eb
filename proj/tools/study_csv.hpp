#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace bernrand_cli {

/// Malformed input file; the message carries file, row and column context.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Covariate {
  std::string name;
  bool numeric = true;
  std::vector<double> numbers;
  std::vector<std::string> labels;
};

/// A parsed study file: unit_id, w_obs, y_obs, propensity and any x_ columns.
struct StudyTable {
  std::vector<std::string> unit_id;
  std::vector<unsigned char> w_obs;
  std::vector<double> y_obs;
  std::vector<double> propensity;
  std::vector<Covariate> covariates;

  std::size_t size() const noexcept { return unit_id.size(); }
};

StudyTable read_study_csv(const std::string& path);
StudyTable parse_study_csv(const std::string& text, const std::string& source);

/// Splits CSV text into records. Quoted fields may contain commas, doubled
/// quotes and newlines. Blank lines are skipped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& source);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

} // namespace bernrand_cli
