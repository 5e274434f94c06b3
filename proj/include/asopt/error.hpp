#pragma once

#include <stdexcept>
#include <string>

namespace asopt {

/// Raised when inputs violate a documented precondition (bad ordering,
/// wrong dimensions, unknown config keys). Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when a numerical computation cannot produce a meaningful result.
/// `kind()` is a short machine-readable tag such as "unstable",
/// "infeasible", "singular" or "rank_deficient". Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

}  // namespace asopt
