#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace fris {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Thrown when a problem or channel specification violates its contract.
struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a surface state is inconsistent with the scenario it is
/// evaluated against (wrong element counts, bad mask, ...).
struct InvalidState : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown by the experiment layer for malformed config files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Wrap an angle to the canonical interval (-pi, pi].
inline double wrap_phase(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

}  // namespace fris
