#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace pearle {

/// Raised when a run leaves the admissible state space. Carries the name of the
/// violated invariant, the offending magnitude and, for time-stepped solvers, the
/// step index at which it was detected.
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(std::string invariant, double magnitude,
                     std::optional<long> step = std::nullopt,
                     std::string detail = {});

  const std::string& invariant() const noexcept { return invariant_; }
  double magnitude() const noexcept { return magnitude_; }
  std::optional<long> step() const noexcept { return step_; }

 private:
  std::string invariant_;
  double magnitude_;
  std::optional<long> step_;
};

}  // namespace pearle
