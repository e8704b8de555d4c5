#pragma once

#include <stdexcept>
#include <string>

namespace arbench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector or matrix argument does not match the chain's degrees of freedom.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported robot description.
class UrdfError : public Error {
 public:
  using Error::Error;
};

/// Invalid numeric argument (non-SPD matrix, non-positive length, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace arbench
