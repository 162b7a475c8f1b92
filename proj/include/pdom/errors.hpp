#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace pdom {

/// Six significant digits, for diagnostics.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or channel dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file, JSON document or argument.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An iterative kernel failed to converge or produced non-finite values.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// An eigenvalue sits inside the hyperbolicity band around the imaginary axis.
class NonHyperbolicError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// A Sylvester/Lyapunov operator is singular.
class SolvabilityError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Overflow in the matrix exponential.
class RangeError : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Requested configuration is outside what the library supports.
class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

/// Two certificates that must share a rate do not.
class RateMismatch : public Error {
 public:
  using Error::Error;
};

/// Bisection bracket does not straddle the feasibility boundary.
class InvalidBracket : public Error {
 public:
  using Error::Error;
};

/// A certification step could not establish the claimed inequality.
class CertificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdom
