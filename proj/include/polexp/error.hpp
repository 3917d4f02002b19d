#pragma once

#include <stdexcept>
#include <string>

namespace polexp {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not chain.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value outside its documented domain (negative variance, zero width, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Cholesky failed even after jitter escalation.
class FactorizationError : public Error {
 public:
  FactorizationError(const std::string& what, double final_jitter)
      : Error(what), final_jitter_(final_jitter) {}
  double final_jitter() const noexcept { return final_jitter_; }

 private:
  double final_jitter_;
};

}  // namespace polexp
