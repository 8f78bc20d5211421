#pragma once

#include <stdexcept>
#include <string>

namespace qhe {

/// Invalid argument or an unphysical state handed to a routine.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A stroke was requested while the engine is in the wrong phase of the cycle.
class PhaseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The adaptive ODE integrator could not reach the requested accuracy.
class IntegrationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ramp with (numerically) equal initial and final frequency; the Airy change
/// of variables is singular there and callers should use free evolution.
class DegenerateRamp : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A truncated enumeration did not converge within its level budget.
class ConvergenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qhe
