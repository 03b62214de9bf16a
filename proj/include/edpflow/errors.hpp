#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace edpflow {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when a time integrator produces a non-finite state.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Thrown when the dual Newton iteration hits its iteration cap.
class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(const std::string& what, double gradient_norm)
      : std::runtime_error(what + " (gradient norm " + std::to_string(gradient_norm) + ")"),
        gradient_norm_(gradient_norm) {}
  double gradient_norm() const { return gradient_norm_; }

 private:
  double gradient_norm_;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& what, std::vector<std::string> keys)
      : std::invalid_argument(what), keys_(std::move(keys)) {}
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
};

}  // namespace edpflow
