#pragma once

#include <stdexcept>
#include <string>

namespace qstein {

// Malformed input: tolerance violations, mismatched dimensions, bad parameters.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A block would exceed the configured dense-dimension cap.
class DimensionCapExceeded : public std::length_error {
 public:
  DimensionCapExceeded(long long required, long long allowed)
      : std::length_error("dimension cap exceeded: required dim " + std::to_string(required) +
                          ", allowed dim " + std::to_string(allowed)),
        required_(required),
        allowed_(allowed) {}

  long long required() const { return required_; }
  long long allowed() const { return allowed_; }

 private:
  long long required_;
  long long allowed_;
};

// A computation produced a value that can only come from a bug (e.g. a
// relative entropy below the negative clamp threshold).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qstein
