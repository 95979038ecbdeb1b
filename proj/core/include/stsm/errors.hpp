#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stsm {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (bad sizes, out-of-range values).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration could not be parsed or is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed or geometrically degenerate.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A query point fell outside every mesh triangle.
class PointOutsideMesh : public DataError {
 public:
  explicit PointOutsideMesh(std::size_t index)
      : DataError("point " + std::to_string(index) + " lies outside the mesh"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Factorization or optimization failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace stsm
