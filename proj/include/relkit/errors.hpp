#pragma once

#include <stdexcept>
#include <string>

namespace relkit {

/// Base class of every error raised by relkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A velocity reached or exceeded the guarded speed limit c * (1 - eps_v).
class SpeedBoundViolation : public Error {
 public:
  SpeedBoundViolation(double speed, double limit)
      : Error("speed bound violated: |v| = " + std::to_string(speed) +
              " >= guarded limit " + std::to_string(limit)),
        speed_(speed),
        limit_(limit) {}

  double speed() const noexcept { return speed_; }
  double limit() const noexcept { return limit_; }

 private:
  double speed_;
  double limit_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              " components, got " + std::to_string(got)) {}
};

class NonOrthogonalInput : public Error {
 public:
  using Error::Error;
};

class InvalidPoleSet : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Steering target outside the relativistically reachable set (|v| >= c).
class UnreachableState : public Error {
 public:
  UnreachableState() : Error("unreachable: exceeds speed of light") {}
};

class HorizonExhausted : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace relkit
