#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fris/common.hpp"
#include "fris/direction.hpp"
#include "fris/spherical_harmonics.hpp"

namespace fris {

/// Planar element lattice in the z = 0 plane.
struct SurfaceGeometry {
  int rows = 1;
  int cols = 1;
  double spacing = 0.05;                     ///< meters
  std::vector<Eigen::Vector3d> positions;    ///< one entry per element, row-major

  [[nodiscard]] int elements() const { return static_cast<int>(positions.size()); }
};

inline SurfaceGeometry grid_positions(int rows, int cols, double spacing) {
  if (rows < 1 || cols < 1) throw InvalidSpec("grid_positions: rows and cols must be >= 1");
  if (!(spacing > 0.0)) throw InvalidSpec("grid_positions: spacing must be positive");
  SurfaceGeometry g{rows, cols, spacing, {}};
  g.positions.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      g.positions.emplace_back(r * spacing, c * spacing, 0.0);
  return g;
}

/// ON/OFF element selection with a fixed active count.
struct ActivationMask {
  std::vector<char> active;

  [[nodiscard]] int size() const { return static_cast<int>(active.size()); }
  [[nodiscard]] int active_count() const {
    int n = 0;
    for (char a : active) n += a != 0;
    return n;
  }
  [[nodiscard]] bool is_active(int m) const { return active.at(m) != 0; }

  static ActivationMask all_on(int m) { return ActivationMask{std::vector<char>(m, 1)}; }

  static ActivationMask from_indices(int m, const std::vector<int>& idx) {
    ActivationMask mask{std::vector<char>(m, 0)};
    for (int i : idx) mask.active.at(i) = 1;
    return mask;
  }

  [[nodiscard]] std::vector<int> active_indices() const {
    std::vector<int> idx;
    for (int m = 0; m < size(); ++m)
      if (active[m]) idx.push_back(m);
    return idx;
  }
};

/// Positions of the active elements, preserving element order.
inline std::vector<Eigen::Vector3d> activation_apply(const ActivationMask& mask,
                                                     const SurfaceGeometry& geometry) {
  if (mask.size() != geometry.elements())
    throw InvalidState("activation_apply: mask length does not match element count");
  if (mask.active_count() < 1)
    throw InvalidState("activation_apply: mask must activate at least one element");
  std::vector<Eigen::Vector3d> out;
  for (int m = 0; m < mask.size(); ++m)
    if (mask.is_active(m)) out.push_back(geometry.positions[m]);
  return out;
}

/// Nearest b-bit phase codeword 2*pi*k/2^b, ties broken toward the smaller
/// index. Result is returned as the codeword itself, in [0, 2*pi).
inline double quantize_phase(double phase, int bits) {
  if (bits < 1) throw InvalidSpec("quantize_phase: bits must be >= 1");
  int levels = 1 << bits;
  double step = kTwoPi / levels;
  // Normalize to [0, 2*pi) before searching the codebook.
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  int best = 0;
  double best_dist = 0.0;
  for (int k = 0; k < levels; ++k) {
    double d = std::fabs(wrap_phase(p - k * step));
    if (k == 0 || d < best_dist - 1e-15) {
      best = k;
      best_dist = d;
    }
  }
  return best * step;
}

/// Per-element reflection phases; unit modulus throughout. bits empty means
/// continuous phases.
struct ReflectionConfig {
  std::vector<double> phases;
  std::optional<int> bits;

  [[nodiscard]] std::complex<double> coefficient(int m) const {
    return std::polar(1.0, phases.at(m));
  }

  static ReflectionConfig zeros(int m, std::optional<int> bits = std::nullopt) {
    return ReflectionConfig{std::vector<double>(m, 0.0), bits};
  }

  void quantize() {
    if (!bits) return;
    for (double& p : phases) p = quantize_phase(p, *bits);
  }
};

/// Per-element pattern coefficients over the real spherical-harmonic basis.
/// Energy is measured as the raw coefficient norm; the isotropic pattern has
/// energy 4*pi, so budgets expressed "in isotropic units" are multiplied by
/// sh_isotropic_energy().
struct PatternCoeffs {
  Eigen::MatrixXcd coeffs;     ///< elements x Q
  double energy_budget = sh_isotropic_energy();

  [[nodiscard]] int elements() const { return static_cast<int>(coeffs.rows()); }
  [[nodiscard]] int basis_size() const { return static_cast<int>(coeffs.cols()); }

  static PatternCoeffs isotropic(int elements, int q, double budget) {
    PatternCoeffs p;
    p.coeffs = Eigen::MatrixXcd::Zero(elements, q);
    Eigen::VectorXcd iso = sh_isotropic_coeffs(q);
    for (int m = 0; m < elements; ++m) p.coeffs.row(m) = iso.transpose();
    p.energy_budget = budget;
    return p;
  }
};

/// Default pattern energy budget: 10^(8/10) in isotropic-energy units, the
/// 38.901 peak-gain figure, so optimized and fixed patterns compete at a
/// matched directivity cap.
inline double default_energy_budget() { return std::pow(10.0, 0.8) * sh_isotropic_energy(); }

inline std::complex<double> pattern_gain(const Eigen::VectorXcd& element_coeffs,
                                         const Direction& dir) {
  Eigen::VectorXd y = sh_basis(dir, static_cast<int>(element_coeffs.size()));
  std::complex<double> acc = 0.0;
  for (int q = 0; q < y.size(); ++q) acc += element_coeffs[q] * y[q];
  return acc;
}

inline PatternCoeffs project_pattern_energy(PatternCoeffs p) {
  if (!(p.energy_budget > 0.0)) throw InvalidSpec("project_pattern_energy: budget must be positive");
  for (int m = 0; m < p.elements(); ++m) {
    double e = p.coeffs.row(m).squaredNorm();
    if (e > p.energy_budget) p.coeffs.row(m) *= std::sqrt(p.energy_budget / e);
  }
  return p;
}

/// 3GPP TR 38.901 single-element amplitude pattern: 65 degree 3-dB widths in
/// both cuts, 30 dB floor, 8 dBi peak at boresight (polar = pi/2, azimuth 0).
inline double tr38901_amplitude(const Direction& dir) {
  double theta_deg = dir.polar() * 180.0 / kPi;
  double phi_deg = wrap_phase(dir.azimuth()) * 180.0 / kPi;
  double av = std::min(12.0 * std::pow((theta_deg - 90.0) / 65.0, 2.0), 30.0);
  double ah = std::min(12.0 * std::pow(phi_deg / 65.0, 2.0), 30.0);
  double attenuation = std::min(av + ah, 30.0);
  double gain_db = 8.0 - attenuation;
  return std::pow(10.0, gain_db / 20.0);
}

/// Uniform evaluation interface over the three pattern sources: optimized
/// coefficients, the isotropic baseline, and the fixed 38.901 baseline.
class PatternSet {
 public:
  enum class Kind { coeffs, isotropic, tr38901 };

  static PatternSet isotropic() { return PatternSet(Kind::isotropic); }
  static PatternSet tr38901() { return PatternSet(Kind::tr38901); }
  static PatternSet from_coeffs(PatternCoeffs c) {
    PatternSet p(Kind::coeffs);
    p.coeffs_ = std::move(c);
    return p;
  }
  static PatternSet baseline(const std::string& kind) {
    if (kind == "isotropic") return isotropic();
    if (kind == "tr38901") return tr38901();
    throw InvalidSpec("baseline_pattern: unknown kind '" + kind + "'");
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const PatternCoeffs& coeffs() const { return coeffs_; }

  [[nodiscard]] std::complex<double> gain(int element, const Direction& dir) const {
    switch (kind_) {
      case Kind::isotropic:
        return {1.0, 0.0};
      case Kind::tr38901:
        return {tr38901_amplitude(dir), 0.0};
      case Kind::coeffs:
        return pattern_gain(coeffs_.coeffs.row(element).transpose(), dir);
    }
    return {};
  }

  /// Combined gain for one cascaded path: the element pattern evaluated at
  /// the incidence and departure directions, multiplied (reciprocal model).
  [[nodiscard]] std::complex<double> effective(int element, const Direction& incidence,
                                               const Direction& departure) const {
    return gain(element, incidence) * gain(element, departure);
  }

 private:
  explicit PatternSet(Kind k) : kind_(k) {}
  Kind kind_;
  PatternCoeffs coeffs_;
};

/// Evenly spread layout of `count` elements over a rows x cols grid; the
/// traditional-RIS benchmark placement. A perfect-square count becomes a
/// uniform sub-grid, otherwise linear indices are spread evenly.
inline std::vector<int> uniform_layout_indices(int rows, int cols, int count) {
  int total = rows * cols;
  if (count < 1 || count > total) throw InvalidSpec("uniform_layout_indices: count out of range");
  if (count == total) {
    std::vector<int> all(total);
    for (int i = 0; i < total; ++i) all[i] = i;
    return all;
  }
  int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
  if (side * side == count && side <= rows && side <= cols) {
    auto spread = [](int n, int extent) {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i)
        idx[i] = n == 1 ? (extent - 1) / 2
                        : static_cast<int>(std::lround(i * double(extent - 1) / (n - 1)));
      return idx;
    };
    std::vector<int> rs = spread(side, rows), cs = spread(side, cols);
    std::vector<int> out;
    for (int r : rs)
      for (int c : cs) out.push_back(r * cols + c);
    return out;
  }
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = static_cast<int>(std::lround(i * double(total - 1) / (count - 1)));
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization

inline nlohmann::ordered_json surface_state_json(const SurfaceGeometry& g, const ActivationMask& mask,
                                                 const ReflectionConfig& refl,
                                                 const PatternSet& patterns) {
  nlohmann::ordered_json j;
  j["geometry"] = {{"rows", g.rows}, {"cols", g.cols}, {"spacing", g.spacing}};
  std::string bits(mask.active.size(), '0');
  for (std::size_t i = 0; i < mask.active.size(); ++i)
    if (mask.active[i]) bits[i] = '1';
  j["mask"] = bits;
  j["phases"] = refl.phases;
  if (patterns.kind() == PatternSet::Kind::coeffs) {
    const auto& pc = patterns.coeffs();
    auto arr = nlohmann::ordered_json::array();
    for (int m = 0; m < pc.elements(); ++m) {
      auto row = nlohmann::ordered_json::array();
      for (int q = 0; q < pc.basis_size(); ++q)
        row.push_back({pc.coeffs(m, q).real(), pc.coeffs(m, q).imag()});
      arr.push_back(row);
    }
    j["pattern_coeffs"] = arr;
    j["energy_budget"] = pc.energy_budget;
  } else {
    j["pattern"] = patterns.kind() == PatternSet::Kind::isotropic ? "isotropic" : "tr38901";
  }
  return j;
}

}  // namespace fris
