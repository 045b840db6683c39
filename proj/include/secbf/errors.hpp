#pragma once

#include <stdexcept>
#include <string>

namespace secbf {

/// Base class of every error raised by the library. `kind()` is a stable
/// class name used by the CLI in its diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "InvalidInput"; }
};

class PreconditionViolated : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "PreconditionViolated"; }
};

/// No sensor combination is consistent with the data: more than s sensors
/// are corrupted, or the matching tolerance is too tight for the noise.
class AttackModelViolated : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "AttackModelViolated"; }
};

class KernelConditionViolated : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override {
    return "KernelConditionViolated";
  }
};

/// The CBF constraints admit no input this step.
class Infeasible : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "Infeasible"; }
};

class SolverFailure : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "SolverFailure"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
};

}  // namespace secbf
