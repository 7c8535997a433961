// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Thrown when an operation receives arguments outside its contract.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when a computation produces or receives non-finite values.
struct NumericFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by file readers on malformed input; message carries the byte offset.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when Dirichlet partitioning cannot satisfy its constraints.
struct PartitionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on malformed run configuration files; message is line-anchored.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
