#pragma once

#include <stdexcept>
#include <string>

namespace wvfreq {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kPhysics = 3,
  kNumerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad or inconsistent input.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::kValidation, what) {}
};

class DegenerateFitError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AliasingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Inputs are well formed but outside the regime the model describes.
class PhysicsError : public Error {
 public:
  explicit PhysicsError(const std::string& what) : Error(ExitCode::kPhysics, what) {}
};

class DomainError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class TotalInternalReflectionError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class GrazingIncidenceError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class WeakValueValidityError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class DarkPortEmptyError : public PhysicsError {
 public:
  using PhysicsError::PhysicsError;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

class UnreachableTargetError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InternalConsistencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace wvfreq
