#pragma once

#include <stdexcept>

namespace cavspin {

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, numerical 4.
// Precondition violations on library calls throw std::invalid_argument.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cavspin
