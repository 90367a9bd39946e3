#pragma once

#include <stdexcept>
#include <string>

namespace cfembed {

// Invalid caller-supplied data: shape mismatches, empty inputs, bad options.
struct input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Linear algebra gave up: factorization failed at the jitter ceiling, or a
// solve could not reach the required residual.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be opened, read, or parsed.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cfembed
