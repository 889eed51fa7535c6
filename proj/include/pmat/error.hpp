#pragma once

#include <stdexcept>
#include <string>

namespace pmat {

/// Raised when caller-supplied data violates an operation's contract:
/// wrong shapes, out-of-range values, malformed config or files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Session or config file with an unknown magic or version.
class UnsupportedFormat : public DataError {
 public:
  using DataError::DataError;
};

/// A pipeline stage was handed a field that already went through a later stage.
class StageOrderError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace pmat
