#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iscr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant (dangling ids, bad ranges, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Request conflicts with current state (finished session, duplicate submission).
class ConflictError : public Error {
 public:
  using Error::Error;
};

#define ISCR_EXPECT(cond, msg)                                    \
  do {                                                            \
    if (!(cond)) throw ::iscr::ContractError(std::string(msg));   \
  } while (0)

}  // namespace iscr
