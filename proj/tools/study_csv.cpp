#include "study_csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace bernrand_cli {
namespace {

std::string where(const std::string& source, std::size_t line, const std::string& column) {
  std::ostringstream out;
  out << source << ": row " << line;
  if (!column.empty())
    out << ", column '" << column << "'";
  return out.str();
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos)
    return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> to_number(const std::string& cell) {
  const std::string s = trim(cell);
  if (s.empty())
    return std::nullopt;
  const char* begin = s.data();
  if (*begin == '+')
    ++begin;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return value;
}

} // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& source) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && trim(row[0]).empty();
    if (!blank)
      rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n')
          ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
    case '"':
      if (field_started && !trim(field).empty())
        throw InputError(where(source, line, "") + ": stray quote inside a field");
      field.clear();
      quoted = true;
      field_started = true;
      break;
    case ',':
      end_field();
      break;
    case '\r':
      break;
    case '\n':
      end_row();
      ++line;
      break;
    default:
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted)
    throw InputError(where(source, line, "") + ": unterminated quoted field");
  if (!field.empty() || !row.empty())
    end_row();
  return rows;
}

StudyTable parse_study_csv(const std::string& text, const std::string& source) {
  auto rows = parse_csv(text, source);
  if (rows.empty())
    throw InputError(source + ": file is empty; a header row is required");

  const auto& header = rows.front();
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name = trim(header[j]);
    if (name.empty())
      throw InputError(where(source, 1, "") + ": empty column name at position " +
                       std::to_string(j + 1));
    if (!index.emplace(name, j).second)
      throw InputError(where(source, 1, name) + ": duplicate column");
  }
  for (const char* required : {"unit_id", "w_obs", "y_obs", "propensity"})
    if (!index.count(required))
      throw InputError(source + ": missing required column '" + required + "'");

  std::vector<std::size_t> covariate_columns;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (trim(header[j]).rfind("x_", 0) == 0)
      covariate_columns.push_back(j);

  StudyTable table;
  std::vector<std::vector<std::string>> raw(covariate_columns.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != header.size())
      throw InputError(where(source, line, "") + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(row.size()));
    auto cell = [&](const char* name) { return trim(row[index.at(name)]); };
    auto number = [&](const char* name) {
      const std::string s = cell(name);
      if (s.empty())
        throw InputError(where(source, line, name) + ": missing value");
      const auto v = to_number(s);
      if (!v || !std::isfinite(*v))
        throw InputError(where(source, line, name) + ": '" + s +
                         "' is not a finite number");
      return *v;
    };

    const std::string id = cell("unit_id");
    if (id.empty())
      throw InputError(where(source, line, "unit_id") + ": missing value");
    const std::string w = cell("w_obs");
    if (w != "0" && w != "1")
      throw InputError(where(source, line, "w_obs") + ": '" + w + "' is not 0 or 1");
    const double y = number("y_obs");
    const double e = number("propensity");
    if (!(e > 0.0 && e < 1.0))
      throw InputError(where(source, line, "propensity") + ": " + cell("propensity") +
                       " is not strictly between 0 and 1");

    table.unit_id.push_back(id);
    table.w_obs.push_back(w == "1" ? 1 : 0);
    table.y_obs.push_back(y);
    table.propensity.push_back(e);
    for (std::size_t c = 0; c < covariate_columns.size(); ++c) {
      const std::string value = trim(row[covariate_columns[c]]);
      if (value.empty())
        throw InputError(where(source, line, trim(header[covariate_columns[c]])) +
                         ": missing value");
      raw[c].push_back(value);
    }
  }
  if (table.size() == 0)
    throw InputError(source + ": no data rows");

  for (std::size_t c = 0; c < covariate_columns.size(); ++c) {
    Covariate cov;
    cov.name = trim(header[covariate_columns[c]]);
    cov.numeric = std::all_of(raw[c].begin(), raw[c].end(),
                              [](const std::string& s) { return to_number(s).has_value(); });
    if (cov.numeric)
      for (const auto& s : raw[c])
        cov.numbers.push_back(*to_number(s));
    else
      cov.labels = std::move(raw[c]);
    table.covariates.push_back(std::move(cov));
  }
  return table;
}

StudyTable read_study_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError(path + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_study_csv(buffer.str(), path);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

} // namespace bernrand_cli
