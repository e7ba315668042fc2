#pragma once

#include <stdexcept>
#include <string>

namespace exponent_lab {

// Each category maps to one CLI exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

// Vertex or step budgets exceeded.
class ResourceError : public InputError {
 public:
  using InputError::InputError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Too few usable scales to fit.
class EstimationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A query reached vertices flagged as truncation boundary.
class ContaminationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace exponent_lab
