#pragma once

#include <stdexcept>
#include <string>

namespace tclflex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: non-finite values, dimension mismatches, out-of-range
// requests.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A configuration that is individually well-formed but inconsistent, e.g. a
// deadband that does not fit inside the bin grid.
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

// A control input that leaves the admissible set 0 <= u <= x.
class ConstraintViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace tclflex
