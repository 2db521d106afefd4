#pragma once

#include <stdexcept>
#include <string>

namespace cegnn {

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible extents, out-of-range indices, malformed configurations.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf reached an operation boundary, or an integrator blew up.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File missing, unreadable, truncated, or inconsistent with its manifest.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cegnn
