#pragma once

#include <stdexcept>
#include <string>

namespace subexp {

/// Invalid user-facing configuration or model parameters. `field()` names the
/// offending key (e.g. "model.alpha") when known.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  explicit ConfigError(const std::string& what) : ConfigError(std::string{}, what) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A computation would exceed its configured size budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical quality could not be guaranteed (quadrature error, truncation
/// remainder, grid far too short, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace subexp
