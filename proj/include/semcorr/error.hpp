#pragma once

#include <stdexcept>
#include <string>

namespace semcorr {

// Root of the library's exception hierarchy. The CLI maps each leaf type to
// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or configuration dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, masks, annotations).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values reached a loss or an optimizer step.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace semcorr
