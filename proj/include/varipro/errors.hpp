#pragma once

#include <stdexcept>
#include <string>

namespace varipro {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
  using Error::Error;
};
struct DomainViolation : Error {
  using Error::Error;
};
struct NegativeIntensity : Error {
  using Error::Error;
};
struct NonBinaryMask : Error {
  using Error::Error;
};
struct EmptyKernel : Error {
  using Error::Error;
};
struct DegenerateGeometry : Error {
  using Error::Error;
};
struct ConvergenceFailure : Error {
  using Error::Error;
};
struct NonSmooth : Error {
  using Error::Error;
};
struct Unsupported : Error {
  using Error::Error;
};
struct SingularDenoiser : Error {
  using Error::Error;
};
struct FilterDomainViolation : Error {
  using Error::Error;
};
struct StepSizeViolation : Error {
  using Error::Error;
};
struct InnerSolveFailure : Error {
  using Error::Error;
};
struct NotContractive : Error {
  using Error::Error;
};
struct Diverged : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace varipro
