#pragma once

#include <stdexcept>
#include <string>

namespace iact {

/// Base of every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An API was called outside its contract (wrong mode, missing state).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is invalid or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A persisted file is malformed, truncated, or of the wrong version.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace iact
