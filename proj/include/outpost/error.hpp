#pragma once

#include <stdexcept>
#include <string>

namespace outpost {

// Invalid user-supplied parameters (CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not meet its contract (CLI exit code 1).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A table or enumeration would exceed its configured size budget.
class BudgetExceeded : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace outpost
