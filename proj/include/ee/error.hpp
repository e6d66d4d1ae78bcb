#ifndef EE_ERROR_HPP
#define EE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ee {

/// Invalid experiment, ladder, partition or kernel configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state outside the configured state space.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An empty energy ring where a draw or restriction needed mass, or an
/// aborted run under the abort-on-violation policy.
class StabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite log densities, singular solves, residuals above tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments to a pure utility (length mismatch, not a
/// probability vector, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace ee

#endif  // EE_ERROR_HPP
