#pragma once

#include <stdexcept>
#include <string>

namespace carnot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed frame, map or run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// The frame fields fail to form a basis at a point.
class SingularFrame : public Error {
public:
  using Error::Error;
};

/// A bracket escapes the declared filtration.
class GradingViolation : public Error {
public:
  using Error::Error;
};

/// A flow, exponential or dilation left the chart.
class OutOfChart : public Error {
public:
  using Error::Error;
};

/// Adaptive integration could not reach the requested accuracy.
class StepFailure : public Error {
public:
  using Error::Error;
};

/// Newton inversion of the exponential map did not converge.
class NoConvergence : public Error {
public:
  using Error::Error;
};

/// Truncated structure constants fail the Jacobi identity.
class JacobiViolation : public Error {
public:
  using Error::Error;
};

/// The algebra is deeper than the tabulated BCH expansion.
class UnsupportedDepth : public Error {
public:
  using Error::Error;
};

/// An intermediate product of a scaled word left the admissible ball.
class OutOfDomain : public Error {
public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace carnot
