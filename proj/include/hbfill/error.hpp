#pragma once

#include <stdexcept>
#include <string>

namespace hbfill {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside an accepted range (parameter domain, grid size, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The numerics failed: no wall-touch, NaN in the state, root not bracketed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent files.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace hbfill
