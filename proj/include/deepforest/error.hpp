#pragma once

#include <stdexcept>
#include <string>

namespace deepforest {

/// Bad invocation or configuration. Maps to CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, missing, or insufficient input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular systems, failed fits and other numerical breakdowns. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace deepforest
