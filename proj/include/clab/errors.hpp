#pragma once

#include <stdexcept>
#include <string>

namespace clab {

// Base class for every numerical failure raised by the library. Precondition
// violations use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonSymmetric : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class StepSizeUnderflow : public Error {
 public:
  using Error::Error;
};

class NoRootFound : public Error {
 public:
  using Error::Error;
};

class MetricAppearsConstant : public Error {
 public:
  using Error::Error;
};

class ZeroField : public Error {
 public:
  using Error::Error;
};

class ApproximationNotConverging : public Error {
 public:
  using Error::Error;
};

}  // namespace clab
