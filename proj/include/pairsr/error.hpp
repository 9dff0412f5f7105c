#pragma once

#include <stdexcept>
#include <string>

namespace pairsr {

// Precondition violations on arguments (bad sizes, out-of-range parameters).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File system and codec failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical procedure could not produce a result (e.g. no admissible overlap).
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pairsr
