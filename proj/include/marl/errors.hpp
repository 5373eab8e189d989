#pragma once

#include <stdexcept>
#include <string>

namespace marl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or an incompatible combination of settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An API was called in the wrong state (e.g. step after termination).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A value outside its permitted domain (e.g. message token out of range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but written by an incompatible version or for a
/// different architecture.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (unreadable or unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace marl
