#pragma once

#include <stdexcept>
#include <string>

namespace aecr {

/// Raised when parameters, configs or tensor shapes do not fit together.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::string field = {})
      : std::runtime_error(msg), field_(std::move(field)) {}

  /// Dotted path of the offending config field, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised when caller-provided data violates a precondition.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed or mismatched files (checkpoints, weights, images).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when optimization produces non-finite values.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aecr
