#pragma once

#include <stdexcept>
#include <string>

namespace inrlab {

/// Invalid shapes, unknown kinds, malformed configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API misuse, e.g. backward() before forward().
struct UsageError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Coordinate outside the unit hypercube.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// NaN/Inf detected in values, gradients or the loss.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or unwritable files and directories.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace inrlab
