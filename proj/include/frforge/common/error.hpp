#pragma once

#include <stdexcept>
#include <string>

namespace frforge {

// Caller violated a documented precondition. CLI exit code 1.
class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or missing upstream artifact. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Non-finite value produced during a forward pass or training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyDatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RatioInfeasibleError : public std::runtime_error {
 public:
  RatioInfeasibleError(const std::string& what, double achievable)
      : std::runtime_error(what), achievable_(achievable) {}

  double achievable_ratio() const noexcept { return achievable_; }

 private:
  double achievable_;
};

}  // namespace frforge
