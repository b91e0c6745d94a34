#pragma once

#include <stdexcept>
#include <string>

namespace convreg {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or parameter-vector dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid layer or network configuration (even kernels, factor mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input values outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

// Degenerate data: all-zero loss mask, component with no usable weight.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// API misuse: empty batch, cache from a different forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

// File-format errors.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class BadVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class LengthMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Filesystem-level failures (missing file, short read, write failure).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace convreg
