#pragma once

#include <stdexcept>
#include <string>

namespace m3d {

/// Malformed, truncated or incompatible input data (sequence files, checkpoints, configs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or gradient became non-finite during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace m3d
