#pragma once

#include <stdexcept>
#include <string>

namespace hambvp {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid jet arithmetic, e.g. division by a zero-valued jet.
class ArithmeticDomainError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector/matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid mesh construction (non-monotone times, bad warp, N < 1).
class MeshError : public Error {
 public:
  using Error::Error;
};

/// An implicit stage solve did not converge.
class StepFailure : public Error {
 public:
  StepFailure(const std::string& msg, double t, double h, double residual)
      : Error(msg), t(t), h(h), residual(residual) {}
  double t;
  double h;
  double residual;
};

/// A trajectory left the representable range (non-finite state).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int step_index)
      : Error(msg), step_index(step_index) {}
  int step_index;
};

/// Newton iteration on a shooting residual did not reach tolerance.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Branch topology does not match any measurable break pattern.
class UnmeasurableError : public Error {
 public:
  using Error::Error;
};

/// No seed solutions were found, so no diagram can be assembled.
class EmptyDiagramError : public Error {
 public:
  using Error::Error;
};

/// A classifier was called on a point outside its corank range.
class WrongClassifierError : public Error {
 public:
  using Error::Error;
};

}  // namespace hambvp
