#pragma once

#include <stdexcept>

namespace mopg {

/// Input or precondition violation. The CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: singular matrix, non-finite value, degenerate fusion.
/// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A sphere point fell within the equator band of a tangent chart, where the
/// inverse central projection is undefined. Density evaluation converts this
/// to a zero density instead of propagating the error.
struct ProjectionAtInfinity : NumericError {
  using NumericError::NumericError;
};

}  // namespace mopg
