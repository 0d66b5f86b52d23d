#ifndef AFBC_ERRORS_HPP
#define AFBC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace afbc {

// Invalid configuration or shape mismatch detected before any work starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: calling operations out of order, indices out of range.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf in parameters, gradients or losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace afbc

#endif  // AFBC_ERRORS_HPP
