#pragma once

#include <stdexcept>
#include <string>

namespace ampg {

/// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The induced chain is not ergodic (singular stationary system or a
/// stationary probability at numerical zero).
struct ErgodicityError : Error {
  using Error::Error;
};

/// The fundamental-matrix solve failed; signals non-ergodicity or a
/// conditioning breakdown.
struct SingularSystemError : Error {
  using Error::Error;
};

/// An iterative solver hit its iteration cap before meeting its threshold.
struct NoConvergenceError : Error {
  using Error::Error;
};

/// A policy entry required to be positive is zero.
struct ZeroSupportError : Error {
  using Error::Error;
};

/// The requested constrained set is empty.
struct InfeasibleError : Error {
  using Error::Error;
};

/// A trajectory is shorter than the estimator requires.
struct LengthError : Error {
  using Error::Error;
};

/// The game carries no certified potential for the requested computation.
struct UnsupportedStructureError : Error {
  using Error::Error;
};

/// Game generation kept producing non-ergodic instances.
struct GenerationError : Error {
  using Error::Error;
};

/// A generator spec asks for an impossible shape.
struct InfeasibleSpecError : Error {
  using Error::Error;
};

}  // namespace ampg
