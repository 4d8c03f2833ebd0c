#pragma once

#include <stdexcept>
#include <string>

namespace artic {

/// Bad input: shapes, invariants, malformed files. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file did not conform to its documented format.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The pipeline ran but could not produce a result (object not found,
/// non-finite loss, no feasible plan). Maps to CLI exit code 2.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace artic
