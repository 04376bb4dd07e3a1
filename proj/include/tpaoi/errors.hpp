#pragma once

#include <stdexcept>
#include <string>

namespace tpaoi {

// Every library error derives from Error so callers (the CLI in particular)
// can map failures to a single machine-readable line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class TraceError : public Error {
 public:
  explicit TraceError(const std::string& what) : Error("trace", what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

class EmptyDataError : public Error {
 public:
  explicit EmptyDataError(const std::string& what) : Error("empty-data", what) {}
};

class SetupError : public Error {
 public:
  explicit SetupError(const std::string& what) : Error("setup", what) {}
};

// Raised when an internal invariant of the simulator or trainer is broken.
// This is a bug, not a user error.
class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what) : Error("invariant", what) {}
};

}  // namespace tpaoi
