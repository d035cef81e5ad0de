#pragma once

#include <stdexcept>
#include <string>

namespace topoconv {

// Incompatible tensor shapes or malformed layer geometry.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reading or writing an artifact failed (missing file, bad magic, truncated payload).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input was well-formed but violated a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace topoconv
