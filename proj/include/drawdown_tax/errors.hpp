#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace drawdown_tax {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The shifted argument x - xi(x) reached zero where a ratio of scale
/// functions is evaluated.
class SingularInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// g changes sign more than once, so no case of the solver applies.
class AssumptionViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical post-condition that must hold by construction did not.
class InternalInconsistency : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Config validation failure carrying every violated constraint.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::invalid_argument(join(violations)),
        violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid configuration:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }

  std::vector<std::string> violations_;
};

}  // namespace drawdown_tax
