#ifndef ALTPROJ_ERROR_HPP
#define ALTPROJ_ERROR_HPP

#include <stdexcept>
#include <string>

namespace altproj {

// Base for every error raised by the library. The CLI maps subclasses to
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on the caller's inputs was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Feature or label id outside the model's index range.
class IndexError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Non-finite potential or score reached inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A global (non-factored) constraint was handed to an exact inference path.
// Such constraints need sampled expectations (gibbs.hpp).
class RoutingError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Exhaustive enumeration refused because the state space is too large.
class GuardError : public ContractError {
 public:
  using ContractError::ContractError;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace altproj

#endif  // ALTPROJ_ERROR_HPP
