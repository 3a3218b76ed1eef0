#pragma once

#include <stdexcept>
#include <string>

namespace kafnet {

// Bad input: malformed files, inconsistent shapes, invalid configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced during computation, divergence during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kafnet
