#pragma once

#include <stdexcept>
#include <string>

namespace lbp {

// Caller passed arguments outside an operation's domain.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Parameters fall outside the regime where an operation is defined.
class UnsupportedRegime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed to produce a trustworthy value.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Root search found no sign change inside its bracket.
class BracketFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// Truncated state space leaves more mass outside than tolerated.
class CapTooSmall : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// Rejection sampling would need an impractical number of attempts.
class ImpracticalSampling : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbp
