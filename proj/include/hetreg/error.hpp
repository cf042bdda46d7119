#pragma once

#include <stdexcept>
#include <string>

namespace hetreg {

// A caller broke an operation's precondition (wrong task kind, out-of-range
// input, malformed spec).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure did not reach its stopping criterion.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regularizer variant that an operation does not support.
class UnsupportedProfile : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

}  // namespace hetreg
