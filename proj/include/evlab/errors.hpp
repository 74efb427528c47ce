#pragma once

#include <stdexcept>
#include <string>

namespace evlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Near-Jordan structure: eigenvalue matching failed or |v*u| below tolerance.
struct DefectivePair : Error {
  using Error::Error;
};

/// Selected eigenvalues violate the pairwise separation requirement.
struct SeparationViolated : Error {
  using Error::Error;
};

/// Linear solve rejected: condition estimate beyond double precision.
struct IllConditioned : Error {
  using Error::Error;
};

/// Cubic branch selection could not be disambiguated.
struct BranchAmbiguity : Error {
  using Error::Error;
};

/// Root bracketing found no sign change.
struct BracketFailure : Error {
  using Error::Error;
};

struct QuadratureFailure : Error {
  using Error::Error;
};

/// Finite-difference estimates at two step sizes disagree.
struct FDInstability : Error {
  using Error::Error;
};

struct EigenvalueCollision : Error {
  using Error::Error;
};

/// Quadratic form lost positive definiteness (q at or beyond the probe limit).
struct PositivityLost : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

}  // namespace evlab
