#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hypcon {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : std::runtime_error("offset " + std::to_string(offset) + ": " + message),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Positivity (hyperbolicity) violations and other malformed model definitions.
class ModelError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  enum class Kind { step_underflow, non_finite };
  IntegrationError(Kind kind, double t, const std::string& message)
      : std::runtime_error(message), kind_(kind), t_(t) {}
  Kind kind() const noexcept { return kind_; }
  double time() const noexcept { return t_; }

 private:
  Kind kind_;
  double t_;
};

// A characteristic left the stored trajectory before reaching its boundary.
class HorizonError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Characteristics of one family crossed: the predicted gradients blow up.
class BlowUpError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ControllerError : public std::runtime_error {
 public:
  ControllerError(int step, const std::string& message)
      : std::runtime_error("step " + std::to_string(step) + ": " + message), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hypcon
