#pragma once

#include <stdexcept>
#include <string>

namespace qpww {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad truncation, nonzero mean, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to deliver its contract: divergent series,
/// Newton failure, singular systems, step rejection.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpww
