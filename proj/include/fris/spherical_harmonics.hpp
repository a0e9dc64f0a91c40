#pragma once

#include <Eigen/Dense>

#include "fris/common.hpp"
#include "fris/direction.hpp"

namespace fris {

/// Number of real spherical harmonics up to and including order n.
inline int sh_count(int order) { return (order + 1) * (order + 1); }

inline constexpr int kMaxShOrder = 3;
inline constexpr int kMaxShCount = 16;

/// Real spherical harmonics, orthonormal under the unit-sphere measure,
/// evaluated at a unit vector. Supports q up to 16 (order 3), which is
/// enough angular resolution for the path counts used here.
inline Eigen::VectorXd sh_basis(const Direction& dir, int q) {
  if (q < 1 || q > kMaxShCount) throw InvalidSpec("sh_basis: q must be in [1, 16]");
  const double x = dir.vec().x(), y = dir.vec().y(), z = dir.vec().z();
  const double x2 = x * x, y2 = y * y, z2 = z * z;
  Eigen::VectorXd out(q);
  static const double c00 = 0.5 / std::sqrt(kPi);
  static const double c1 = std::sqrt(3.0 / (4.0 * kPi));
  static const double c2a = 0.5 * std::sqrt(15.0 / kPi);
  static const double c20 = 0.25 * std::sqrt(5.0 / kPi);
  static const double c22 = 0.25 * std::sqrt(15.0 / kPi);
  static const double c3m3 = 0.25 * std::sqrt(35.0 / (2.0 * kPi));
  static const double c3m2 = 0.5 * std::sqrt(105.0 / kPi);
  static const double c3m1 = 0.25 * std::sqrt(21.0 / (2.0 * kPi));
  static const double c30 = 0.25 * std::sqrt(7.0 / kPi);
  static const double c32 = 0.25 * std::sqrt(105.0 / kPi);
  const double vals[kMaxShCount] = {
      c00,
      c1 * y,
      c1 * z,
      c1 * x,
      c2a * x * y,
      c2a * y * z,
      c20 * (3.0 * z2 - 1.0),
      c2a * x * z,
      c22 * (x2 - y2),
      c3m3 * y * (3.0 * x2 - y2),
      c3m2 * x * y * z,
      c3m1 * y * (5.0 * z2 - 1.0),
      c30 * z * (5.0 * z2 - 3.0),
      c3m1 * x * (5.0 * z2 - 1.0),
      c32 * z * (x2 - y2),
      c3m3 * x * (x2 - 3.0 * y2),
  };
  for (int i = 0; i < q; ++i) out[i] = vals[i];
  return out;
}

/// Coefficient vector whose expansion is identically 1 over the sphere.
inline Eigen::VectorXcd sh_isotropic_coeffs(int q) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(q);
  c[0] = 2.0 * std::sqrt(kPi);
  return c;
}

/// Energy of the isotropic (unit-gain) expansion; used as the unit in which
/// pattern energy budgets are expressed.
inline double sh_isotropic_energy() { return 4.0 * kPi; }

}  // namespace fris
