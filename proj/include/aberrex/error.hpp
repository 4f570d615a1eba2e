#pragma once

#include <stdexcept>
#include <string>

namespace aberrex {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad shapes, out-of-range parameters).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& reason)
      : Error(path + ": " + reason), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// A numerical procedure could not produce a result (degenerate data).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace aberrex
