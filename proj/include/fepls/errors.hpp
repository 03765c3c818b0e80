#pragma once

#include <stdexcept>
#include <string>

namespace fepls {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something unusable (bad dimension, non-semiorthogonal
// matrix, malformed option). Maps to CLI exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data are unusable: malformed file, too few observations, labels
// outside {0,1}. Also maps to CLI exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failure inside an algorithm (singular system, non-SPD block
// where one is required). Maps to CLI exit code 1.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A basis whose Gram matrix is numerically singular.
class DegenerateBasis : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Rank-deficient coordinate projection design.
class CoordinateRankError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

}  // namespace fepls
