#pragma once

#include <stdexcept>
#include <string>

namespace gift {

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated persisted data.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Artifact bound to a different backend than the one in use.
class IncompatibilityError : public std::runtime_error {
 public:
  explicit IncompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during optimization; carries the offending step.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int step)
      : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace gift
