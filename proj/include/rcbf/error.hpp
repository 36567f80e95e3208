#pragma once

#include <stdexcept>
#include <string>

namespace rcbf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected input: wrong shape, non-finite value, violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A factorization or iteration broke down.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The actuation bound cannot dominate the drift plus disturbance bound,
/// so no positive a_max exists at this state.
class AssumptionViolated : public Error {
 public:
  using Error::Error;
};

/// The relative geometry is too close (or too uncertain) for the CBC
/// lower bound to be defined.
class InfeasibleGeometry : public Error {
 public:
  using Error::Error;
};

}  // namespace rcbf
