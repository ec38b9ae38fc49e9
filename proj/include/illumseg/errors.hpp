#pragma once

#include <stdexcept>
#include <string>

namespace illumseg {

/// File could not be read, parsed or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad config, malformed thresholds, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite iterate or other numerical breakdown.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace illumseg
