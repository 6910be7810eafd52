#pragma once

#include <stdexcept>
#include <string>

namespace ocpik {

/// Base class of every error thrown by ocpik.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A constraint row has lower bound above its upper bound.
class InfeasibleBoundsError : public Error {
 public:
  using Error::Error;
};

/// A value outside the domain of an operation (negative slack, bad option).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ApiMisuseError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

class UnknownProblemError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed solution or data file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Errors tied to a particular stage of the horizon. stage() is -1 when the
/// failure is not stage-specific.
class StageError : public Error {
 public:
  StageError(const std::string& what, int stage)
      : Error(stage >= 0 ? what + " (stage " + std::to_string(stage) + ")"
                         : what),
        stage_(stage) {}

  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Non-finite value produced by a user function or an autodiff sweep.
class EvaluationError : public StageError {
 public:
  explicit EvaluationError(const std::string& what, int stage = -1)
      : StageError(what, stage) {}
};

/// Equality Jacobian lost row rank during the Riccati elimination.
class RankDeficientError : public StageError {
 public:
  explicit RankDeficientError(const std::string& what, int stage = -1)
      : StageError(what, stage) {}
};

}  // namespace ocpik
