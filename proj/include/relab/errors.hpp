#pragma once

#include <stdexcept>
#include <string>

namespace relab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes passed to an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied data: token ids out of range, overlong sequences, missing files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model, adapter, schedule or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf surfaced where the training loop cannot continue.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk artifact (checkpoint, corpus, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace relab
