#pragma once

#include <stdexcept>
#include <string>

namespace jetssm {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: validation 2, I/O 3, incompatibility 4.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/channel mismatches get their own type so call sites can distinguish
// them from other validation failures.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint vs. model/data mismatch.
class IncompatibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jetssm
