#pragma once

#include <stdexcept>
#include <string>

namespace drfdm {

// Error categories map onto CLI exit codes: parameter/usage -> 1,
// data -> 2, numeric -> 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

class WindowError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// Student-t variance undefined for dof <= 2.
class MomentError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Mean-variance problem with expected returns collinear with the budget vector.
class DegeneracyError : public NumericError {
 public:
  using NumericError::NumericError;
};

class InfeasibleError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace drfdm
