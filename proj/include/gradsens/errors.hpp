#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gradsens {

//! Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error
{
public:
  using Error::Error;
};

//! A response model failed to evaluate (CLI exit code 3).
class ModelError : public Error
{
public:
  using Error::Error;
};

//! Numerical failure inside a primitive (factorization, eigensolve, ...).
class NumericError : public Error
{
public:
  using Error::Error;
};

class NotPositiveDefiniteError : public NumericError
{
public:
  explicit NotPositiveDefiniteError(std::size_t pivot)
    : NumericError("matrix is not positive definite (pivot " +
                   std::to_string(pivot) + ")")
    , pivot_(pivot)
  {}

  std::size_t pivot() const { return pivot_; }

private:
  std::size_t pivot_;
};

class ConvergenceError : public NumericError
{
public:
  using NumericError::NumericError;
};

//! Raised when the bordered eigen-derivative system is singular, which
//! happens when the eigenvalue is repeated.
class SingularMatrixError : public NumericError
{
public:
  using NumericError::NumericError;
};

} // namespace gradsens
