#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "fris/channel.hpp"
#include "fris/common.hpp"
#include "fris/surface.hpp"

namespace fris {

/// Which surface degrees of freedom are free to optimize.
enum class SurfaceMode { traditional, position_fris, pattern_fris };

inline const char* mode_name(SurfaceMode m) {
  switch (m) {
    case SurfaceMode::traditional: return "traditional";
    case SurfaceMode::position_fris: return "position_fris";
    case SurfaceMode::pattern_fris: return "pattern_fris";
  }
  return "?";
}

/// One single-user experiment instance.
struct Scenario {
  SurfaceGeometry geometry;
  ChannelPair channel;
  double noise_power = 0.0;
  SurfaceMode mode = SurfaceMode::traditional;
};

/// Everything the surface controls for one evaluation.
struct SurfaceState {
  ActivationMask mask;
  ReflectionConfig reflection;
  PatternSet patterns = PatternSet::isotropic();
};

inline void check_state(const Scenario& scenario, const SurfaceState& state) {
  int m = scenario.geometry.elements();
  if (state.mask.size() != m)
    throw InvalidState("SurfaceState: mask length does not match geometry");
  if (static_cast<int>(state.reflection.phases.size()) != m)
    throw InvalidState("SurfaceState: phase count does not match geometry");
  if (state.patterns.kind() == PatternSet::Kind::coeffs &&
      state.patterns.coeffs().elements() != m)
    throw InvalidState("SurfaceState: pattern coefficient rows do not match geometry");
}

/// Inner double sum of the received-power expression for one element:
/// c_m = sum_{l,z} g_{l,z} f_eff(m,l,z) exp(j phi_{m,l,z}), so the overall
/// pre-noise amplitude is sum_m theta_m c_m.
inline std::complex<double> per_element_aggregate(const Scenario& scenario,
                                                  const SurfaceState& state, int m) {
  if (m < 0 || m >= scenario.geometry.elements())
    throw InvalidState("per_element_aggregate: element index out of range");
  const ChannelPair& ch = scenario.channel;
  const Eigen::Vector3d& p = scenario.geometry.positions[m];
  std::complex<double> acc = 0.0;
  for (int l = 0; l < ch.l_paths(); ++l) {
    const HopPath& in = ch.bs_paths()[l];
    for (int z = 0; z < ch.z_paths(); ++z) {
      const HopPath& out = ch.user_paths()[z];
      double phi = steering_phase(p, out.direction, in.direction, ch.wavelength());
      acc += in.gain * out.gain * state.patterns.effective(m, in.direction, out.direction) *
             std::polar(1.0, phi);
    }
  }
  return acc;
}

/// Received signal power: (1/(LZ)) |sum_m theta_m c_m|^2 + sigma^2 over the
/// active elements.
inline double received_power(const Scenario& scenario, const SurfaceState& state) {
  check_state(scenario, state);
  std::complex<double> amp = 0.0;
  for (int m = 0; m < scenario.geometry.elements(); ++m) {
    if (!state.mask.is_active(m)) continue;
    amp += state.reflection.coefficient(m) * per_element_aggregate(scenario, state, m);
  }
  double lz = double(scenario.channel.l_paths()) * scenario.channel.z_paths();
  return std::norm(amp) / lz + scenario.noise_power;
}

/// Shannon rate from total received power (which includes the noise term).
inline double achievable_rate(double power, double noise) {
  if (!(noise > 0.0)) throw InvalidSpec("achievable_rate: noise must be positive");
  double signal = std::max(0.0, power - noise);
  return std::log2(1.0 + signal / noise);
}

/// Effective MISO channel h_k seen by user k through the surface: the
/// MISO generalization of the single-user inner sum, with a BS array
/// steering factor per inbound path.
inline Eigen::VectorXcd effective_user_channel(const MultiUserChannel& mu,
                                               const SurfaceGeometry& geometry,
                                               const SurfaceState& state, int k) {
  if (k < 0 || k >= mu.users()) throw InvalidState("effective_user_channel: user index out of range");
  int nt = mu.bs_antennas();
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(nt);
  for (int m = 0; m < geometry.elements(); ++m) {
    if (!state.mask.is_active(m)) continue;
    std::complex<double> theta = state.reflection.coefficient(m);
    const Eigen::Vector3d& p = geometry.positions[m];
    for (int l = 0; l < mu.l_paths(); ++l) {
      const BsArrayPath& in = mu.bs_paths()[l];
      std::complex<double> path_acc = 0.0;
      for (const HopPath& out : mu.user_paths(k)) {
        double phi = steering_phase(p, out.direction, in.incidence, mu.wavelength());
        path_acc += in.gain * out.gain *
                    state.patterns.effective(m, in.incidence, out.direction) *
                    std::polar(1.0, phi);
      }
      for (int n = 0; n < nt; ++n) h[n] += theta * mu.bs_steering(n, l) * path_acc;
    }
  }
  return h;
}

/// BS transmit precoders, one per user, under a total power budget.
struct PrecoderSet {
  std::vector<Eigen::VectorXcd> w;
  double power_budget = 1.0;

  [[nodiscard]] double total_power() const {
    double p = 0.0;
    for (const auto& wk : w) p += wk.squaredNorm();
    return p;
  }
};

inline double weighted_sum_rate(const std::vector<Eigen::VectorXcd>& channels,
                                const PrecoderSet& precoders, const std::vector<double>& weights,
                                double noise) {
  std::size_t k_users = channels.size();
  if (precoders.w.size() != k_users || weights.size() != k_users)
    throw InvalidState("weighted_sum_rate: user count mismatch");
  if (!(noise > 0.0)) throw InvalidSpec("weighted_sum_rate: noise must be positive");
  double wsr = 0.0;
  for (std::size_t k = 0; k < k_users; ++k) {
    double sig = 0.0, interf = 0.0;
    for (std::size_t j = 0; j < k_users; ++j) {
      double p = std::norm(channels[k].dot(precoders.w[j]));
      if (j == k)
        sig = p;
      else
        interf += p;
    }
    wsr += weights[k] * std::log2(1.0 + sig / (interf + noise));
  }
  return wsr;
}

}  // namespace fris
