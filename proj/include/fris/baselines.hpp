#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fris/metrics.hpp"
#include "fris/wmmse.hpp"

namespace fris {

/// Per-element channel contribution vectors v_{k,m} with unit reflection,
/// so the user channel is h_k = sum_m theta_m v_{k,m}.
inline std::vector<std::vector<Eigen::VectorXcd>> element_channel_vectors(
    const MultiUserChannel& mu, const SurfaceGeometry& geometry, const ActivationMask& mask,
    const PatternSet& patterns) {
  std::vector<std::vector<Eigen::VectorXcd>> v(mu.users());
  SurfaceState probe{mask, ReflectionConfig::zeros(geometry.elements()), patterns};
  for (int k = 0; k < mu.users(); ++k) {
    v[k].assign(geometry.elements(), Eigen::VectorXcd::Zero(mu.bs_antennas()));
    for (int m = 0; m < geometry.elements(); ++m) {
      if (!mask.is_active(m)) continue;
      SurfaceState single = probe;
      single.mask = ActivationMask::from_indices(geometry.elements(), {m});
      v[k][m] = effective_user_channel(mu, geometry, single, k);
    }
  }
  return v;
}

/// Coordinate-ascent phase alignment maximizing ||h_k||^2 for one user; each
/// element update is the exact one-variable optimum, so the norm is
/// non-decreasing sweep over sweep.
inline ReflectionConfig align_phases_to_user(const std::vector<Eigen::VectorXcd>& v_user,
                                             const ActivationMask& mask, int sweeps = 5) {
  int elements = static_cast<int>(v_user.size());
  ReflectionConfig refl = ReflectionConfig::zeros(elements);
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(v_user.empty() ? 0 : v_user[0].size());
  for (int m = 0; m < elements; ++m)
    if (mask.is_active(m)) h += v_user[m];
  for (int s = 0; s < sweeps; ++s) {
    for (int m = 0; m < elements; ++m) {
      if (!mask.is_active(m)) continue;
      Eigen::VectorXcd rest = h - refl.coefficient(m) * v_user[m];
      std::complex<double> corr = rest.dot(v_user[m]);  // <v_m, rest> with rest conjugated
      double phase = std::abs(corr) > 0.0 ? wrap_phase(-std::arg(corr)) : 0.0;
      // corr = rest^H v_m, so theta = exp(-j arg(corr)) aligns v_m with rest
      refl.phases[m] = phase;
      h = rest + refl.coefficient(m) * v_user[m];
    }
  }
  return refl;
}

struct MuBaselineResult {
  SurfaceState state;
  PrecoderSet precoders;
  double wsr = 0.0;
  std::vector<std::vector<double>> wmmse_traces;
};

/// Traditional-RIS multi-user benchmark: fixed element pattern, passive
/// beamforming aligned to each user in turn, WMMSE precoding, best of the
/// per-user alignments kept.
inline MuBaselineResult traditional_mu_baseline(const MultiUserChannel& mu,
                                                const SurfaceGeometry& geometry,
                                                const PatternSet& pattern,
                                                const std::vector<double>& weights,
                                                double power_budget, double noise,
                                                int wmmse_iterations) {
  ActivationMask mask = ActivationMask::all_on(geometry.elements());
  auto v = element_channel_vectors(mu, geometry, mask, pattern);
  MuBaselineResult best;
  for (int target = 0; target < mu.users(); ++target) {
    SurfaceState state{mask, align_phases_to_user(v[target], mask), pattern};
    std::vector<Eigen::VectorXcd> h;
    for (int k = 0; k < mu.users(); ++k)
      h.push_back(effective_user_channel(mu, geometry, state, k));
    WmmseResult w = wmmse_precoders(h, weights, power_budget, noise, wmmse_iterations);
    double wsr = weighted_sum_rate(h, w.precoders, weights, noise);
    best.wmmse_traces.push_back(std::move(w.wsr_trace));
    if (target == 0 || wsr > best.wsr) {
      best.state = state;
      best.precoders = std::move(w.precoders);
      best.wsr = wsr;
    }
  }
  return best;
}

}  // namespace fris
