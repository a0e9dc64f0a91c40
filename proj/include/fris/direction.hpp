#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "fris/common.hpp"

namespace fris {

/// Unit-norm propagation direction. Angles follow the physics convention:
/// polar angle measured from +z, azimuth around z in (-pi, pi]. The surface
/// lies in the z = 0 plane with its boresight along +x.
class Direction {
 public:
  explicit Direction(const Eigen::Vector3d& v) {
    double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidSpec("Direction: zero or non-finite vector");
    u_ = v / n;
  }

  static Direction from_angles(double azimuth, double polar) {
    double s = std::sin(polar);
    return Direction(Eigen::Vector3d(s * std::cos(azimuth), s * std::sin(azimuth), std::cos(polar)));
  }

  [[nodiscard]] const Eigen::Vector3d& vec() const { return u_; }
  [[nodiscard]] double azimuth() const { return std::atan2(u_.y(), u_.x()); }
  [[nodiscard]] double polar() const { return std::acos(std::clamp(u_.z(), -1.0, 1.0)); }

 private:
  Eigen::Vector3d u_;
};

}  // namespace fris
