#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bernrand {

enum class ErrorCode {
  InvalidArgument = 1,
  LengthMismatch = 2,
  OutOfRange = 3,
  TooLargeToEnumerate = 4,
  BudgetExhausted = 5,
  UnsupportedCriterion = 6,
  Unsatisfiable = 7,
};

/// Base exception for every failure raised by the library. The code is what
/// the C API reports; the message is what a user sees.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Raised by the rejection sampler when the attempt budget runs out before
/// enough draws were accepted.
class BudgetExhaustedError : public Error {
public:
  BudgetExhaustedError(std::size_t accepted, std::size_t attempts,
                       const std::string& what)
      : Error(ErrorCode::BudgetExhausted, what), accepted_(accepted),
        attempts_(attempts) {}

  std::size_t accepted() const noexcept { return accepted_; }
  std::size_t attempts() const noexcept { return attempts_; }

private:
  std::size_t accepted_;
  std::size_t attempts_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void ensure(bool condition, ErrorCode code, const std::string& what) {
  if (!condition)
    fail(code, what);
}

} // namespace bernrand
