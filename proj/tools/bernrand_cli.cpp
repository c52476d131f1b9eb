// Command-line front end. Talks to the library only through the C API.

#include "bernrand/bernrand.h"
#include "study_csv.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using bernrand_cli::InputError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitEngine = 3;

class ApiError : public std::runtime_error {
public:
  ApiError(br_status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  br_status status() const noexcept { return status_; }

private:
  br_status status_;
};

void check(br_status status) {
  if (status != BR_OK)
    throw ApiError(status, br_last_error());
}

int exit_code(br_status status) {
  switch (status) {
  case BR_INVALID_ARGUMENT:
  case BR_LENGTH_MISMATCH:
  case BR_OUT_OF_RANGE:
    return kExitInput;
  default:
    return kExitEngine;
  }
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using DesignPtr = std::unique_ptr<br_design, Deleter<br_design, br_design_destroy>>;
using CriterionPtr =
    std::unique_ptr<br_criterion, Deleter<br_criterion, br_criterion_destroy>>;
using StudyPtr = std::unique_ptr<br_study, Deleter<br_study, br_study_destroy>>;
using InversionPtr =
    std::unique_ptr<br_inversion, Deleter<br_inversion, br_inversion_destroy>>;
using EnumerationPtr =
    std::unique_ptr<br_enumeration, Deleter<br_enumeration, br_enumeration_destroy>>;
using SimResultPtr =
    std::unique_ptr<br_sim_result, Deleter<br_sim_result, br_sim_result_destroy>>;

double display(double value) { return std::round(value * 100.0) / 100.0; }

json optional_number(int has, double value) { return has ? json(value) : json(nullptr); }

std::uint64_t default_seed() {
  const char* env = std::getenv("BERNRAND_SEED");
  if (!env || !*env)
    return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used, 0);
    if (used != std::string(env).size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw InputError(std::string("BERNRAND_SEED='") + env + "' is not an unsigned integer");
  }
}

// ---- shared options ------------------------------------------------------------

struct StudyOptions {
  std::string data;
  std::string support = "nondegenerate";
  std::optional<std::size_t> nt;
  std::vector<std::string> strata;
  std::string stat = "mean-diff";
  std::string method = "exact";
  std::uint64_t draws = 10000;
  double tau = 0.0;
  std::string sided = "two";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out;
  bool add_one = false;
  std::uint64_t attempt_factor = 1000;
  std::uint64_t enumeration_limit = 1ull << 22;
  bool timing = false;
};

void add_study_options(CLI::App* cmd, StudyOptions& o, bool engine) {
  cmd->add_option("--data", o.data, "Study CSV (unit_id, w_obs, y_obs, propensity, x_*)")
      ->required();
  cmd->add_option("--support", o.support, "Assignment support")
      ->check(CLI::IsMember({"full", "nondegenerate", "fixed-nt", "criterion"}));
  cmd->add_option("--nt", o.nt, "Number of treated units (fixed-nt, criterion)");
  cmd->add_option("--stratum", o.strata,
                  "Treated count within a stratum, COL=VALUE:COUNT (criterion support)");
  cmd->add_option("--stat", o.stat, "Test statistic")->check(CLI::IsMember({"mean-diff"}));
  cmd->add_option("--tau", o.tau, "Additive effect under the sharp hypothesis");
  cmd->add_option("--seed", o.seed, "Seed (default: $BERNRAND_SEED or 0)");
  cmd->add_option("--threads", o.threads, "Worker threads, 0 for all cores");
  cmd->add_option("--out", o.out, "Output file (default: stdout)");
  cmd->add_option("--enumeration-limit", o.enumeration_limit,
                  "Largest support the exact engine enumerates");
  cmd->add_flag("--timing", o.timing, "Record wall-clock time in timing_ms");
  if (engine) {
    cmd->add_option("--method", o.method, "p-value engine")
        ->check(CLI::IsMember({"exact", "rejection", "importance"}));
    cmd->add_option("--draws", o.draws, "Monte Carlo draws M")->check(CLI::PositiveNumber);
    cmd->add_option("--sided", o.sided, "Alternative")
        ->check(CLI::IsMember({"two", "upper", "lower"}));
    cmd->add_flag("--add-one", o.add_one, "Use (count + 1) / (M + 1) for rejection sampling");
    cmd->add_option("--attempt-factor", o.attempt_factor,
                    "Rejection sampling attempts allowed per accepted draw")
        ->check(CLI::PositiveNumber);
  }
}

struct Stratum {
  std::string column;
  std::string value;
  std::size_t count;
};

Stratum parse_stratum(const std::string& text) {
  const auto eq = text.find('=');
  const auto colon = text.rfind(':');
  if (eq == std::string::npos || colon == std::string::npos || colon < eq || eq == 0)
    throw InputError("--stratum '" + text + "' is not of the form COL=VALUE:COUNT");
  Stratum s{text.substr(0, eq), text.substr(eq + 1, colon - eq - 1), 0};
  const std::string count = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    s.count = std::stoull(count, &used);
    if (used != count.size() || count.front() == '-')
      throw std::invalid_argument("count");
  } catch (const std::exception&) {
    throw InputError("--stratum '" + text + "': count '" + count +
                     "' is not a non-negative integer");
  }
  return s;
}

/// Support plus the criterion handle it may reference.
struct SupportHandle {
  br_support support{};
  CriterionPtr criterion;
};

SupportHandle make_support(const StudyOptions& o) {
  SupportHandle h;
  const bool has_strata = !o.strata.empty();
  if (o.support == "full" || o.support == "nondegenerate") {
    if (o.nt || has_strata)
      throw InputError("--nt and --stratum apply only to fixed-nt and criterion supports");
    h.support.kind = o.support == "full" ? BR_SUPPORT_FULL : BR_SUPPORT_NONDEGENERATE;
  } else if (o.support == "fixed-nt") {
    if (!o.nt)
      throw InputError("--support fixed-nt requires --nt");
    if (has_strata)
      throw InputError("--stratum requires --support criterion");
    h.support.kind = BR_SUPPORT_FIXED_TOTAL;
    h.support.n_treated = *o.nt;
  } else {
    if (!o.nt && !has_strata)
      throw InputError("--support criterion requires --nt and/or --stratum");
    br_criterion* c = nullptr;
    check(br_criterion_create(&c));
    h.criterion.reset(c);
    if (o.nt)
      check(br_criterion_require_total(c, *o.nt));
    for (const auto& text : o.strata) {
      const Stratum s = parse_stratum(text);
      check(br_criterion_require_stratum(c, s.column.c_str(), s.value.c_str(), s.count));
    }
    h.support.kind = BR_SUPPORT_CRITERION;
    h.support.criterion = c;
  }
  return h;
}

StudyPtr make_study(const bernrand_cli::StudyTable& table) {
  br_design* raw = nullptr;
  check(br_design_create(table.propensity.data(), table.size(), &raw));
  DesignPtr design(raw);
  for (const auto& cov : table.covariates) {
    if (cov.numeric) {
      check(br_design_add_numeric_covariate(design.get(), cov.name.c_str(),
                                            cov.numbers.data(), cov.numbers.size()));
    } else {
      std::vector<const char*> labels;
      for (const auto& s : cov.labels)
        labels.push_back(s.c_str());
      check(br_design_add_categorical_covariate(design.get(), cov.name.c_str(),
                                                labels.data(), labels.size()));
    }
  }
  br_study* study = nullptr;
  check(br_study_create(design.get(), table.w_obs.data(), table.y_obs.data(), table.size(),
                        &study));
  return StudyPtr(study);
}

br_engine make_engine(const StudyOptions& o, std::uint64_t seed) {
  br_engine e;
  br_engine_defaults(&e);
  e.method = o.method == "exact"       ? BR_METHOD_EXACT
             : o.method == "rejection" ? BR_METHOD_REJECTION
                                       : BR_METHOD_IMPORTANCE;
  e.sidedness = o.sided == "two" ? BR_TWO_SIDED : o.sided == "upper" ? BR_UPPER : BR_LOWER;
  e.draws = o.draws;
  e.seed = seed;
  e.threads = o.threads;
  e.add_one = o.add_one;
  e.attempt_factor = o.attempt_factor;
  e.enumeration_limit = o.enumeration_limit;
  return e;
}

// Threads and output paths are left out: they must not change the envelope.
json echo_study(const StudyOptions& o, bool engine) {
  json j;
  j["data"] = o.data;
  j["support"] = o.support;
  j["nt"] = o.nt ? json(*o.nt) : json(nullptr);
  j["strata"] = o.strata;
  j["stat"] = o.stat;
  j["tau"] = o.tau;
  if (engine) {
    j["method"] = o.method;
    j["draws"] = o.method == "exact" ? json(nullptr) : json(o.draws);
    j["sided"] = o.sided;
    j["add_one"] = o.add_one;
    j["attempt_factor"] = o.attempt_factor;
  }
  j["enumeration_limit"] = o.enumeration_limit;
  return j;
}

const char* method_name(br_method m) {
  switch (m) {
  case BR_METHOD_EXACT:
    return "exact";
  case BR_METHOD_REJECTION:
    return "rejection";
  case BR_METHOD_IMPORTANCE:
    return "importance";
  }
  return "unknown";
}

const char* sided_name(br_sidedness s) {
  switch (s) {
  case BR_TWO_SIDED:
    return "two";
  case BR_UPPER:
    return "upper";
  case BR_LOWER:
    return "lower";
  }
  return "unknown";
}

// ---- envelope ------------------------------------------------------------------

class Run {
public:
  explicit Run(std::string command) : start_(std::chrono::steady_clock::now()) {
    envelope_["command"] = std::move(command);
    envelope_["config_echo"] = json::object();
    envelope_["seed"] = nullptr;
    envelope_["results"] = nullptr;
    envelope_["diagnostics"] = json::array();
    envelope_["timing_ms"] = nullptr;
  }

  json& operator[](const char* key) { return envelope_[key]; }
  void diagnostic(std::string message) { envelope_["diagnostics"].push_back(std::move(message)); }

  void fail(const std::string& code, const std::string& message) {
    envelope_["results"] = nullptr;
    envelope_["error"] = {{"code", code}, {"message", message}};
  }

  void emit(const std::string& path, bool timing) {
    if (timing)
      envelope_["timing_ms"] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
              .count();
    const std::string text = envelope_.dump(2) + "\n";
    if (path.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw InputError(path + ": cannot open for writing");
    out << text;
  }

private:
  json envelope_;
  std::chrono::steady_clock::time_point start_;
};

/// Runs body and converts failures into an error envelope and an exit code.
template <class Body>
int guarded(Run& run, const std::string& out, bool timing, Body&& body) {
  int code = kExitOk;
  try {
    body();
  } catch (const InputError& e) {
    run.fail("input_error", e.what());
    code = kExitInput;
  } catch (const ApiError& e) {
    run.fail(br_status_name(e.status()), e.what());
    code = exit_code(e.status());
  } catch (const std::exception& e) {
    run.fail("internal", e.what());
    code = kExitEngine;
  }
  if (code != kExitOk)
    std::cerr << "bernrand: " << run["error"]["message"].get<std::string>() << "\n";
  try {
    run.emit(out, timing);
  } catch (const std::exception& e) {
    std::cerr << "bernrand: " << e.what() << "\n";
    return kExitInput;
  }
  return code;
}

// ---- commands --------------------------------------------------------------------

int cmd_test(const StudyOptions& o) {
  Run run("test");
  return guarded(run, o.out, o.timing, [&] {
    run["config_echo"] = echo_study(o, true);
    const std::uint64_t seed = o.seed ? *o.seed : default_seed();
    run["seed"] = seed;
    const auto table = bernrand_cli::read_study_csv(o.data);
    const StudyPtr study = make_study(table);
    const SupportHandle support = make_support(o);
    const br_engine engine = make_engine(o, seed);
    br_report report{};
    check(br_test(study.get(), o.tau, &support.support, nullptr, &engine, &report));

    json r;
    r["p_value"] = report.p_value;
    r["p_value_display"] = display(report.p_value);
    r["t_obs"] = report.t_obs;
    r["t_obs_display"] = display(report.t_obs);
    r["method"] = method_name(report.method);
    r["sidedness"] = sided_name(report.sidedness);
    r["draws_used"] = report.draws_used;
    r["mc_standard_error"] =
        optional_number(report.has_mc_standard_error, report.mc_standard_error);
    r["effective_sample_size"] =
        optional_number(report.has_effective_sample_size, report.effective_sample_size);
    r["acceptance_rate"] =
        optional_number(report.has_acceptance_rate, report.acceptance_rate);
    run["results"] = std::move(r);
  });
}

struct GridOptions {
  std::string grid = "-3:3:0.1";
  double alpha = 0.05;
};

std::array<double, 3> parse_grid(const std::string& text) {
  std::array<double, 3> v{};
  std::stringstream in(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ':')) {
    if (i == 3)
      break;
    try {
      std::size_t used = 0;
      v[i] = std::stod(part, &used);
      if (used != part.size())
        throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("--tau-grid '" + text + "': '" + part + "' is not a number");
    }
    ++i;
  }
  if (i != 3 || std::getline(in, part))
    throw InputError("--tau-grid '" + text + "' is not of the form LO:HI:STEP");
  return v;
}

int cmd_ci(const StudyOptions& o, const GridOptions& g) {
  Run run("ci");
  return guarded(run, o.out, o.timing, [&] {
    json echo = echo_study(o, true);
    echo.erase("tau");
    echo["alpha"] = g.alpha;
    echo["tau_grid"] = g.grid;
    run["config_echo"] = std::move(echo);
    const std::uint64_t seed = o.seed ? *o.seed : default_seed();
    run["seed"] = seed;
    const auto [lo, hi, step] = parse_grid(g.grid);
    const auto table = bernrand_cli::read_study_csv(o.data);
    const StudyPtr study = make_study(table);
    const SupportHandle support = make_support(o);
    const br_engine engine = make_engine(o, seed);
    br_inversion* raw = nullptr;
    check(br_invert(study.get(), &support.support, nullptr, lo, hi, step, g.alpha, &engine,
                    &raw));
    const InversionPtr inv(raw);

    json r;
    double ci_lo = 0.0, ci_hi = 0.0;
    if (br_inversion_interval(inv.get(), &ci_lo, &ci_hi)) {
      r["ci"] = {ci_lo, ci_hi};
      r["ci_display"] = {display(ci_lo), display(ci_hi)};
    } else {
      r["ci"] = nullptr;
      r["ci_display"] = nullptr;
    }
    const double point = br_inversion_point_estimate(inv.get());
    r["point_estimate"] = point;
    r["point_estimate_display"] = display(point);
    r["alpha"] = g.alpha;
    r["contiguous"] = br_inversion_contiguous(inv.get()) != 0;
    r["method"] = o.method;
    r["draws"] = br_inversion_draws(inv.get());
    json curve = json::array();
    for (std::size_t i = 0; i < br_inversion_curve_size(inv.get()); ++i) {
      double tau = 0.0, p = 0.0;
      check(br_inversion_curve_point(inv.get(), i, &tau, &p));
      curve.push_back({{"tau", tau}, {"p_value", p}, {"p_value_display", display(p)}});
    }
    r["p_curve"] = std::move(curve);
    run["results"] = std::move(r);
    for (std::size_t i = 0; i < br_inversion_diagnostic_count(inv.get()); ++i)
      run.diagnostic(br_inversion_diagnostic(inv.get(), i));
  });
}

int cmd_enumerate(const StudyOptions& o, const std::string& csv_out) {
  Run run("enumerate");
  // Without --out the CSV goes to stdout and the envelope to stderr.
  const bool csv_to_stdout = csv_out.empty();
  int code = kExitOk;
  std::ostringstream csv;
  auto body = [&] {
    run["config_echo"] = echo_study(o, false);
    const auto table = bernrand_cli::read_study_csv(o.data);
    const StudyPtr study = make_study(table);
    const SupportHandle support = make_support(o);
    br_enumeration* raw = nullptr;
    check(br_enumerate(study.get(), &support.support, nullptr, o.tau, o.enumeration_limit,
                       &raw));
    const EnumerationPtr e(raw);
    const std::size_t n = br_enumeration_units(e.get());
    const std::size_t rows = br_enumeration_size(e.get());
    std::vector<unsigned char> bits(n);
    double total = 0.0;
    csv << "bits,probability,statistic\n";
    for (std::size_t i = 0; i < rows; ++i) {
      double p = 0.0, t = 0.0;
      check(br_enumeration_row(e.get(), i, bits.data(), &p, &t));
      total += p;
      for (unsigned char b : bits)
        csv << (b ? '1' : '0');
      csv << ',' << bernrand_cli::format_double(p) << ','
          << bernrand_cli::format_double(t) << '\n';
    }
    if (!csv_to_stdout) {
      std::ofstream out(csv_out, std::ios::binary);
      if (!out)
        throw InputError(csv_out + ": cannot open for writing");
      out << csv.str();
    }
    run["results"] = {{"rows", rows},
                      {"units", n},
                      {"probability_sum", total},
                      {"csv", csv_to_stdout ? json(nullptr) : json(csv_out)}};
  };
  if (csv_to_stdout) {
    try {
      body();
    } catch (const InputError& e) {
      std::cerr << "bernrand: " << e.what() << "\n";
      return kExitInput;
    } catch (const ApiError& e) {
      std::cerr << "bernrand: " << e.what() << "\n";
      return exit_code(e.status());
    }
    std::cout << csv.str();
    return code;
  }
  return guarded(run, "", o.timing, body);
}

// ---- simulate --------------------------------------------------------------------

struct SimInputs {
  std::vector<std::size_t> strata;
  std::vector<double> lambdas;
  std::vector<double> taus;
  std::vector<std::uint64_t> is_m;
  br_sim_config config{};
};

template <class T>
T config_value(const json& j, const std::string& key, const char* type) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw InputError("config key '" + key + "' must be " + type);
  }
}

SimInputs read_sim_config(const std::string& path) {
  SimInputs in;
  br_sim_config_defaults(&in.config);
  auto& c = in.config;
  in.strata.assign(c.stratum_sizes, c.stratum_sizes + c.n_strata);
  in.lambdas.assign(c.lambda_values, c.lambda_values + c.n_lambda);
  in.taus.assign(c.tau_values, c.tau_values + c.n_tau);
  in.is_m.assign(c.is_m_values, c.is_m_values + c.n_is_m);

  if (!path.empty()) {
    std::ifstream file(path, std::ios::binary);
    if (!file)
      throw InputError(path + ": cannot open file");
    json j;
    try {
      j = json::parse(file);
    } catch (const json::parse_error& e) {
      throw InputError(path + ": invalid JSON: " + e.what());
    }
    if (!j.is_object())
      throw InputError(path + ": config must be a JSON object");
    bool n_units_given = false;
    for (const auto& [key, value] : j.items()) {
      if (key == "n_units") {
        c.n_units = config_value<std::size_t>(value, key, "a non-negative integer");
        n_units_given = true;
      } else if (key == "stratum_sizes") {
        in.strata = config_value<std::vector<std::size_t>>(value, key,
                                                           "an array of integers");
      } else if (key == "lambda_values") {
        in.lambdas = config_value<std::vector<double>>(value, key, "an array of numbers");
      } else if (key == "tau_values") {
        in.taus = config_value<std::vector<double>>(value, key, "an array of numbers");
      } else if (key == "replications") {
        c.replications = config_value<std::size_t>(value, key, "a non-negative integer");
      } else if (key == "beta_params") {
        const auto ab = config_value<std::vector<double>>(value, key, "[a, b]");
        if (ab.size() != 2)
          throw InputError("config key 'beta_params' must be [a, b]");
        c.beta_a = ab[0];
        c.beta_b = ab[1];
      } else if (key == "alpha") {
        c.alpha = config_value<double>(value, key, "a number");
      } else if (key == "m_draws") {
        c.m_draws = config_value<std::uint64_t>(value, key, "a non-negative integer");
      } else if (key == "attempt_factor") {
        c.attempt_factor =
            config_value<std::uint64_t>(value, key, "a non-negative integer");
      } else if (key == "seed") {
        c.seed = config_value<std::uint64_t>(value, key, "a non-negative integer");
      } else if (key == "threads") {
        c.threads = config_value<unsigned>(value, key, "a non-negative integer");
      } else if (key == "is_m_values") {
        in.is_m = config_value<std::vector<std::uint64_t>>(value, key,
                                                           "an array of integers");
      } else if (key == "run_power") {
        c.run_power = config_value<bool>(value, key, "a boolean");
      } else if (key == "run_comparison") {
        c.run_comparison = config_value<bool>(value, key, "a boolean");
      } else {
        throw InputError("config key '" + key + "' is not recognised");
      }
    }
    // Stratum sizes fix the population size unless n_units is given too.
    if (!n_units_given) {
      std::size_t total = 0;
      for (auto s : in.strata)
        total += s;
      c.n_units = total;
    }
  }
  if (c.run_comparison && in.is_m.empty())
    throw InputError("config key 'is_m_values' must be nonempty when run_comparison is true");
  c.stratum_sizes = in.strata.data();
  c.n_strata = in.strata.size();
  c.lambda_values = in.lambdas.data();
  c.n_lambda = in.lambdas.size();
  c.tau_values = in.taus.data();
  c.n_tau = in.taus.size();
  c.is_m_values = in.is_m.data();
  c.n_is_m = in.is_m.size();
  return in;
}

json echo_sim(const SimInputs& in) {
  const auto& c = in.config;
  json j;
  j["n_units"] = c.n_units;
  j["stratum_sizes"] = in.strata;
  j["lambda_values"] = in.lambdas;
  j["tau_values"] = in.taus;
  j["replications"] = c.replications;
  j["beta_params"] = {c.beta_a, c.beta_b};
  j["alpha"] = c.alpha;
  j["m_draws"] = c.m_draws;
  j["attempt_factor"] = c.attempt_factor;
  j["seed"] = c.seed;
  j["is_m_values"] = in.is_m;
  j["run_power"] = c.run_power != 0;
  j["run_comparison"] = c.run_comparison != 0;
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw InputError(path.string() + ": cannot open for writing");
  out << text;
}

std::string table_csv(const std::vector<br_table_row>& rows) {
  std::ostringstream csv;
  csv << "lambda,tau,test,rate,se,reps\n";
  for (const auto& r : rows)
    csv << bernrand_cli::format_double(r.lambda) << ','
        << bernrand_cli::format_double(r.tau) << ',' << r.test << ','
        << bernrand_cli::format_double(r.rate) << ',' << bernrand_cli::format_double(r.se)
        << ',' << r.reps << '\n';
  return csv.str();
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<unsigned> threads, bool timing) {
  Run run("simulate");
  return guarded(run, "", timing, [&] {
    SimInputs in = read_sim_config(config_path);
    if (threads)
      in.config.threads = *threads;
    run["config_echo"] = echo_sim(in);
    run["seed"] = in.config.seed;

    br_sim_result* raw = nullptr;
    check(br_simulate(&in.config, &raw));
    const SimResultPtr result(raw);

    std::vector<br_table_row> power(br_sim_power_rows(result.get()));
    for (std::size_t i = 0; i < power.size(); ++i)
      check(br_sim_power_row(result.get(), i, &power[i]));
    std::vector<br_table_row> comparison(br_sim_comparison_rows(result.get()));
    for (std::size_t i = 0; i < comparison.size(); ++i)
      check(br_sim_comparison_row(result.get(), i, &comparison[i]));

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
      throw InputError(out_dir + ": cannot create directory: " + ec.message());
    const fs::path dir(out_dir);

    json files;
    if (in.config.run_power) {
      write_file(dir / "power.csv", table_csv(power));
      const std::size_t strata = br_sim_strata(result.get());
      std::ostringstream csv;
      csv << "lambda,replication,n_treated,n_control";
      for (std::size_t s = 0; s < strata; ++s)
        csv << ",n_treated_x" << s + 1;
      csv << '\n';
      std::vector<std::uint64_t> per(strata);
      const std::size_t rows = br_sim_contingency_rows(result.get());
      for (std::size_t i = 0; i < rows; ++i) {
        double lambda = 0.0;
        std::uint64_t rep = 0, nt = 0, nc = 0;
        check(br_sim_contingency_row(result.get(), i, &lambda, &rep, &nt, &nc, per.data()));
        csv << bernrand_cli::format_double(lambda) << ',' << rep << ',' << nt << ',' << nc;
        for (auto v : per)
          csv << ',' << v;
        csv << '\n';
      }
      write_file(dir / "contingency.csv", csv.str());
      files["power"] = {{"file", "power.csv"}, {"rows", power.size()}};
      files["contingency"] = {{"file", "contingency.csv"}, {"rows", rows}};
    }
    if (in.config.run_comparison) {
      write_file(dir / "rs_vs_is.csv", table_csv(comparison));
      files["rs_vs_is"] = {{"file", "rs_vs_is.csv"}, {"rows", comparison.size()}};
    }

    json manifest;
    manifest["config"] = echo_sim(in);
    manifest["seed"] = in.config.seed;
    manifest["versions"] = {{"bernrand", br_version()},
                            {"rng", "philox4x32-10"},
                            {"compiler", __VERSION__}};
    manifest["files"] = files;
    if (timing) {
      json wall = json::array();
      for (const auto& r : comparison)
        wall.push_back({{"lambda", r.lambda},
                        {"tau", r.tau},
                        {"test", r.test},
                        {"m_draws", r.m_draws},
                        {"wall_ms", r.wall_ms}});
      manifest["comparison_wall_ms"] = std::move(wall);
    } else {
      manifest["comparison_wall_ms"] = nullptr;
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    files["manifest"] = {{"file", "manifest.json"}};

    run["results"] = {{"out_dir", out_dir}, {"files", files}};
  });
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomization inference for Bernoulli-trial experiments"};
  app.set_version_flag("--version", std::string(br_version()));
  app.require_subcommand(1);

  StudyOptions test_opts;
  auto* test = app.add_subcommand("test", "p-value for a sharp hypothesis");
  add_study_options(test, test_opts, true);

  StudyOptions ci_opts;
  GridOptions grid;
  auto* ci = app.add_subcommand("ci", "Confidence interval by test inversion");
  add_study_options(ci, ci_opts, true);
  ci->add_option("--alpha", grid.alpha, "Level of each test");
  ci->add_option("--tau-grid", grid.grid, "Grid of effects LO:HI:STEP");

  StudyOptions enum_opts;
  auto* enumerate = app.add_subcommand("enumerate", "List the support with probabilities");
  add_study_options(enumerate, enum_opts, false);

  std::string sim_config, sim_out;
  std::optional<unsigned> sim_threads;
  bool sim_timing = false;
  auto* simulate = app.add_subcommand("simulate", "Run the power and sampler studies");
  simulate->add_option("--config", sim_config, "JSON simulation config");
  simulate->add_option("--out", sim_out, "Output directory")->required();
  simulate->add_option("--threads", sim_threads, "Worker threads, 0 for all cores");
  simulate->add_flag("--timing", sim_timing, "Record wall-clock times");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*test)
      return cmd_test(test_opts);
    if (*ci)
      return cmd_ci(ci_opts, grid);
    if (*enumerate) {
      const std::string csv_out = enum_opts.out;
      return cmd_enumerate(enum_opts, csv_out);
    }
    return cmd_simulate(sim_config, sim_out, sim_threads, sim_timing);
  } catch (const std::exception& e) {
    std::cerr << "bernrand: " << e.what() << "\n";
    return kExitEngine;
  }
}
