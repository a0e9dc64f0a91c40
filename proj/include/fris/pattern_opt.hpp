#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fris/channel.hpp"
#include "fris/metrics.hpp"
#include "fris/optimize.hpp"
#include "fris/wmmse.hpp"

namespace fris {

/// Multi-user experiment instance for the pattern-reconfigurable surface.
struct MuScenario {
  SurfaceGeometry geometry;
  MultiUserChannel channel;
  double noise_power = 1e-3;
  std::vector<double> weights;     ///< per-user rate weights
  double power_budget = 1.0;       ///< BS transmit power
  int basis_size = kMaxShCount;    ///< spherical-harmonic coefficients per element
  double energy_budget = default_energy_budget();
};

struct PatternOptParams {
  double step_size = 1.0;
  int max_iterations = 40;
  double backtracking = 0.5;
  int wmmse_iterations = 30;
  int max_halvings = 20;

  void validate() const {
    if (!(step_size > 0.0)) throw InvalidSpec("PatternOptParams: step_size must be positive");
    if (max_iterations < 1) throw InvalidSpec("PatternOptParams: max_iterations must be >= 1");
    if (!(backtracking > 0.0 && backtracking < 1.0))
      throw InvalidSpec("PatternOptParams: backtracking must be in (0,1)");
    if (wmmse_iterations < 1) throw InvalidSpec("PatternOptParams: wmmse_iterations must be >= 1");
  }
};

namespace detail {

/// Phase-of-arrival / phase-of-departure decomposition used by both the
/// aligned-pattern synthesis and the gradient: the geometric phase splits as
/// phi = phi_r(z) - phi_t(l) with each part depending on one hop only.
inline double hop_phase(const Eigen::Vector3d& position, const Direction& dir, double wavelength) {
  return kTwoPi / wavelength * dir.vec().dot(position);
}

/// Maximizer of |(a^T c)(b^T c)| over ||c||^2 = energy. The optimum lies in
/// span{conj(a), conj(b)} and attains energy (|<a, b>| + ||a|| ||b||) / 2;
/// the returned vector is rotated so the product comes out real positive.
inline Eigen::VectorXcd link_optimal_coeffs(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b,
                                            double energy) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(a.size());
  double na = a.norm();
  double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return c;
  Eigen::VectorXcd a1 = a.conjugate() / na;
  Eigen::VectorXcd bc = b.conjugate();
  std::complex<double> proj = a1.dot(bc);  // <A1, conj(b)> (conjugates A1)
  Eigen::VectorXcd perp = bc - proj * a1;
  double q = perp.norm();
  double t = 0.5 * std::atan2(q, std::abs(proj));
  c = std::cos(t) * a1;
  if (q > 0.0) {
    double phase = std::abs(proj) > 0.0 ? std::arg(proj) : 0.0;
    c += std::sin(t) * std::polar(1.0, -phase) * (perp / q);
  }
  std::complex<double> val = (a.transpose() * c).value() * (b.transpose() * c).value();
  if (std::abs(val) > 0.0) c *= std::polar(1.0, -0.5 * std::arg(val));
  return std::sqrt(energy) * c;
}

}  // namespace detail

/// Per-element pattern coefficients that bring every cascaded path of the
/// assigned user into phase with positive amplitude. Constraints are solved
/// as a minimum-norm interpolation over the harmonic basis, then scaled up
/// to the energy budget (alignment is scale-invariant). With one user this
/// attains the coherent-combining bound exactly, so the resulting power
/// dominates every isotropic unit-modulus configuration.
///
/// `user_of_element[m]` assigns active element m to the user whose outbound
/// paths it aligns; pass an empty vector for single-user alignment to user 0.
///
/// `orthogonal_signature` selects how multi-user incidence targets are
/// weighted: true gives exactly BS-orthogonal user channels (eigenvectors of
/// the gain-weighted steering Gram, lower power), false keeps unit-modulus
/// DFT phase signatures (full power, residual correlation). Ignored with a
/// single user.
inline PatternCoeffs synthesize_aligned_pattern(const SurfaceGeometry& geometry,
                                                const ActivationMask& mask,
                                                const MultiUserChannel& mu, int basis_size,
                                                double energy_budget,
                                                const std::vector<int>& user_of_element = {},
                                                bool orthogonal_signature = true) {
  PatternCoeffs pc;
  pc.coeffs = Eigen::MatrixXcd::Zero(geometry.elements(), basis_size);
  pc.energy_budget = energy_budget;
  const double lambda = mu.wavelength();

  // Per-user incidence weights. Exact per-path alignment makes every user's
  // BS-side channel proportional to the same steering combination, so with
  // uniform weights the user channels come out mutually parallel and spatial
  // multiplexing collapses. Weighting user k's incidence targets with the
  // k-th eigenvector of the gain-weighted steering Gram D S^H S D makes the
  // aligned user channels exactly orthogonal at the BS (while each user's
  // own paths still combine coherently). Falls back to DFT phase signatures
  // when the Gram is too rank-deficient to separate the users.
  const int n_paths = mu.l_paths();
  Eigen::MatrixXcd signature = Eigen::MatrixXcd::Ones(mu.users(), n_paths);
  if (mu.users() > 1) {
    for (int k = 1; k < mu.users(); ++k)
      for (int l = 0; l < n_paths; ++l)
        signature(k, l) = std::polar(1.0, kTwoPi * (k % n_paths) * l / n_paths);
    Eigen::MatrixXcd s(mu.bs_antennas(), n_paths);
    for (int n = 0; n < mu.bs_antennas(); ++n)
      for (int l = 0; l < n_paths; ++l) s(n, l) = mu.bs_steering(n, l);
    Eigen::VectorXd d(n_paths);
    for (int l = 0; l < n_paths; ++l) d[l] = std::abs(mu.bs_paths()[l].gain);
    Eigen::MatrixXcd gram = d.asDiagonal() * (s.adjoint() * s) * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    if (orthogonal_signature && es.info() == Eigen::Success) {
      double top = es.eigenvalues().maxCoeff();
      int rank = 0;
      for (int l = 0; l < n_paths; ++l)
        if (es.eigenvalues()[l] > 1e-12 * top) ++rank;
      if (rank >= std::min(mu.users(), n_paths))
        for (int k = 0; k < mu.users(); ++k)
          signature.row(k) =
              es.eigenvectors().col(n_paths - 1 - (k % n_paths)).transpose();
    }
  }
  for (int m = 0; m < geometry.elements(); ++m) {
    if (!mask.is_active(m)) continue;
    int user = user_of_element.empty() ? 0 : user_of_element[m];
    const Eigen::Vector3d& p = geometry.positions[m];
    const auto& deps = mu.user_paths(user);
    int cross = 0;
    for (int k = 0; k < mu.users(); ++k)
      if (k != user) cross += static_cast<int>(mu.user_paths(k).size());
    int rows = mu.l_paths() + static_cast<int>(deps.size()) + cross;
    Eigen::MatrixXd v(rows, basis_size);
    Eigen::VectorXcd target(rows);
    int r = 0;
    for (int l = 0; l < mu.l_paths(); ++l, ++r) {
      const BsArrayPath& in = mu.bs_paths()[l];
      v.row(r) = sh_basis(in.incidence, basis_size).transpose();
      std::complex<double> hop = in.gain * std::polar(1.0, -detail::hop_phase(p, in.incidence, lambda));
      // unit-modulus incidence target: the per-user signature already
      // carries the BS-path gain weighting through the weighted Gram
      target[r] = std::abs(hop) > 0.0 ? std::conj(hop) / std::abs(hop) : 1.0;
      target[r] *= signature(user, l);
    }
    for (const HopPath& out : deps) {
      v.row(r) = sh_basis(out.direction, basis_size).transpose();
      std::complex<double> hop = out.gain * std::polar(1.0, detail::hop_phase(p, out.direction, lambda));
      // matched-magnitude departure target: weighting each path by its gain
      // maximizes the user's coherent amplitude within the energy budget
      target[r] = std::conj(hop);
      ++r;
    }
    // null the element's radiation toward every other user's departure
    // directions; otherwise the uncontrolled cross response of each user's
    // elements leaks into (and can dominate) the other users' channels
    for (int k = 0; k < mu.users(); ++k) {
      if (k == user) continue;
      for (const HopPath& out : mu.user_paths(k)) {
        v.row(r) = sh_basis(out.direction, basis_size).transpose();
        target[r] = 0.0;
        ++r;
      }
    }
    // Near-minimum-norm solve with soft nulls. An order-limited basis cannot
    // put a hard null next to an alignment direction; exact interpolation
    // would answer such collisions with enormous coefficients that the
    // energy rescale below then crushes. Down-weighting the null rows and
    // adding a small ridge keeps alignment targets essentially exact in the
    // well-separated case while bounding the energy under collisions.
    Eigen::VectorXd row_weight = Eigen::VectorXd::Ones(rows);
    for (int i = mu.l_paths() + static_cast<int>(deps.size()); i < rows; ++i)
      row_weight[i] = 0.3;
    Eigen::MatrixXd vw = row_weight.asDiagonal() * v;
    Eigen::MatrixXd gram_w = vw.transpose() * vw;
    Eigen::VectorXcd target_w = target;
    for (int i = 0; i < rows; ++i) target_w[i] *= row_weight[i];
    Eigen::VectorXcd rhs = vw.transpose().cast<std::complex<double>>() * target_w;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(basis_size);
    double ridge = 1e-9 * gram_w.trace() / basis_size;
    for (int attempt = 0; attempt < 40; ++attempt, ridge *= 10.0) {
      Eigen::MatrixXd lhs = gram_w;
      lhs.diagonal().array() += ridge;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(lhs);
      Eigen::VectorXd re = ldlt.solve(rhs.real());
      Eigen::VectorXd im = ldlt.solve(rhs.imag());
      for (int i = 0; i < basis_size; ++i) c[i] = std::complex<double>(re[i], im[i]);
      if (c.squaredNorm() <= energy_budget || !c.allFinite()) break;
    }
    double e = c.squaredNorm();
    if (e > 0.0) c *= std::sqrt(energy_budget / e);
    pc.coeffs.row(m) = c.transpose();
  }
  return pc;
}

/// Power-optimal per-element patterns for a single BS-user link.
///
/// Each element's contribution to the received amplitude is the bilinear
/// form (a^T c)(b^T c) in its coefficient vector c, where a and b collect
/// the hop phasors times the basis evaluated at the incidence and departure
/// directions. Over the energy budget the maximum of |(a^T c)(b^T c)| has a
/// closed form: the optimum lies in span{conj(a), conj(b)} and attains
/// E (|<a, b>| + ||a|| ||b||) / 2. Each element's aggregate phasor is then
/// rotated to the positive real axis so all elements combine coherently.
/// Unlike target interpolation this cannot be derailed by nearly coincident
/// constraint directions, so the resulting received power dominates every
/// phase-only configuration on the same mask by a factor of at least the
/// isotropic full-budget gain.
inline PatternCoeffs optimize_link_pattern(const SurfaceGeometry& geometry,
                                           const ActivationMask& mask, const ChannelPair& ch,
                                           int basis_size, double energy_budget) {
  PatternCoeffs pc;
  pc.coeffs = Eigen::MatrixXcd::Zero(geometry.elements(), basis_size);
  pc.energy_budget = energy_budget;
  const double lambda = ch.wavelength();

  Eigen::MatrixXd y_inc(static_cast<int>(ch.bs_paths().size()), basis_size);
  for (std::size_t l = 0; l < ch.bs_paths().size(); ++l)
    y_inc.row(static_cast<int>(l)) = sh_basis(ch.bs_paths()[l].direction, basis_size).transpose();
  Eigen::MatrixXd y_dep(static_cast<int>(ch.user_paths().size()), basis_size);
  for (std::size_t z = 0; z < ch.user_paths().size(); ++z)
    y_dep.row(static_cast<int>(z)) = sh_basis(ch.user_paths()[z].direction, basis_size).transpose();

  for (int m = 0; m < geometry.elements(); ++m) {
    if (!mask.is_active(m)) continue;
    const Eigen::Vector3d& p = geometry.positions[m];
    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(basis_size);
    for (std::size_t l = 0; l < ch.bs_paths().size(); ++l) {
      const HopPath& in = ch.bs_paths()[l];
      a += in.gain * std::polar(1.0, -detail::hop_phase(p, in.direction, lambda)) *
           y_inc.row(static_cast<int>(l)).transpose();
    }
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(basis_size);
    for (std::size_t z = 0; z < ch.user_paths().size(); ++z) {
      const HopPath& out = ch.user_paths()[z];
      b += out.gain * std::polar(1.0, detail::hop_phase(p, out.direction, lambda)) *
           y_dep.row(static_cast<int>(z)).transpose();
    }
    pc.coeffs.row(m) = detail::link_optimal_coeffs(a, b, energy_budget).transpose();
  }
  return pc;
}

/// Per-element patterns for a single BS-user link that put every cascaded
/// path exactly in phase (positive real aggregate phasor per element).
///
/// Each element interpolates one response target per path direction —
/// conjugating the inbound hop at the incidence direction and the outbound
/// hop (magnitude-matched) at each departure direction — as a minimum-norm
/// solve over the harmonic basis, then spends the full energy budget.
/// Directions closer than the basis can separate share a single target whose
/// phase is chosen consistently for both roles (half-angle when a direction
/// serves as both incidence and departure; circular mean between merged
/// departures), so near-coincident paths never produce conflicting
/// constraints and the solve stays well-conditioned. The budget rescale then
/// leaves a large amplitude margin over any phase-only configuration on the
/// same mask while keeping the alignment essentially exact.
inline PatternCoeffs interpolate_aligned_pattern(const SurfaceGeometry& geometry,
                                                 const ActivationMask& mask, const ChannelPair& ch,
                                                 int basis_size, double energy_budget) {
  PatternCoeffs pc;
  pc.coeffs = Eigen::MatrixXcd::Zero(geometry.elements(), basis_size);
  pc.energy_budget = energy_budget;
  const double lambda = ch.wavelength();
  const auto& ins = ch.bs_paths();
  const auto& outs = ch.user_paths();
  const int n_in = static_cast<int>(ins.size());
  const int n_out = static_cast<int>(outs.size());
  const double merge_threshold = 0.35;  // widest merge radius under a collision (radians)

  for (int m = 0; m < geometry.elements(); ++m) {
    if (!mask.is_active(m)) continue;
    const Eigen::Vector3d& p = geometry.positions[m];
    std::vector<std::complex<double>> u(n_in), w(n_out);
    for (int l = 0; l < n_in; ++l)
      u[l] = ins[l].gain * std::polar(1.0, -detail::hop_phase(p, ins[l].direction, lambda));
    for (int z = 0; z < n_out; ++z)
      w[z] = outs[z].gain * std::polar(1.0, detail::hop_phase(p, outs[z].direction, lambda));

    // Interpolate with the given merge threshold; returns the coefficient
    // vector and its pre-rescale energy.
    auto solve_with_merge = [&](double merge_cos, Eigen::VectorXcd& c) {
      // default per-hop conjugation: every (l, z) path phasor becomes
      // |u_l| |w_z| |f_in| |f_z| > 0
      std::vector<double> theta_in(n_in), theta_out(n_out);
      for (int l = 0; l < n_in; ++l) theta_in[l] = -std::arg(u[l]);
      for (int z = 0; z < n_out; ++z) theta_out[z] = -std::arg(w[z]);

      // a direction serving both sides fixes the shared phase to the half
      // angle; every departure phase shifts by the same offset to compensate
      // (exact when there is a single inbound path)
      int shared_out = -1;
      if (n_in == 1) {
        for (int z = 0; z < n_out; ++z)
          if (ins[0].direction.vec().dot(outs[z].direction.vec()) > merge_cos) {
            shared_out = z;
            break;
          }
        if (shared_out >= 0) {
          double theta = -0.5 * std::arg(u[0] * w[shared_out]);
          double delta = theta - theta_in[0];
          theta_in[0] = theta;
          for (int z = 0; z < n_out; ++z) theta_out[z] -= delta;
        }
      }

      struct Target {
        Eigen::Vector3d dir;
        std::complex<double> value;
      };
      std::vector<Target> targets;
      for (int l = 0; l < n_in; ++l) {
        double mag = (l == 0 && shared_out >= 0) ? std::max(1.0, std::abs(w[shared_out])) : 1.0;
        targets.push_back(Target{ins[l].direction.vec(), std::polar(mag, theta_in[l])});
      }
      for (int z = 0; z < n_out; ++z) {
        if (z == shared_out) continue;  // served by the incidence target
        targets.push_back(Target{outs[z].direction.vec(), std::polar(std::abs(w[z]), theta_out[z])});
      }
      // merge remaining near-coincident targets (circular mean phase, larger
      // magnitude); the residual misalignment is exactly what a phase-only
      // element cannot separate either
      std::vector<Target> merged;
      for (const Target& t : targets) {
        bool absorbed = false;
        for (Target& g : merged) {
          if (g.dir.dot(t.dir) > merge_cos) {
            double mag = std::max(std::abs(g.value), std::abs(t.value));
            std::complex<double> mean = g.value / std::abs(g.value) + t.value / std::abs(t.value);
            double phase = std::abs(mean) > 0.0 ? std::arg(mean) : std::arg(g.value);
            g.value = std::polar(mag, phase);
            g.dir = (g.dir + t.dir).normalized();
            absorbed = true;
            break;
          }
        }
        if (!absorbed) merged.push_back(t);
      }

      const int rows = static_cast<int>(merged.size());
      Eigen::MatrixXd v(rows, basis_size);
      Eigen::VectorXcd t(rows);
      for (int r = 0; r < rows; ++r) {
        v.row(r) = sh_basis(Direction(merged[r].dir), basis_size).transpose();
        t[r] = merged[r].value;
      }
      // minimum-norm interpolation on the small side
      Eigen::MatrixXd gram = v * v.transpose();
      gram.diagonal().array() += 1e-12 * gram.trace() / rows;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      Eigen::VectorXd re = ldlt.solve(t.real());
      Eigen::VectorXd im = ldlt.solve(t.imag());
      c = Eigen::VectorXcd::Zero(basis_size);
      for (int r = 0; r < rows; ++r)
        c += std::complex<double>(re[r], im[r]) * v.row(r).transpose();
      return c.squaredNorm();
    };

    // Any phase-only element on this surface has aggregate amplitude at most
    // (sum_l |u_l|)(sum_z |w_z|); a candidate beating that bound preserves the
    // power ordering against the position-optimized baseline.
    double sum_u = 0.0;
    for (int l = 0; l < n_in; ++l) sum_u += std::abs(u[l]);
    double sum_w = 0.0;
    for (int z = 0; z < n_out; ++z) sum_w += std::abs(w[z]);
    double bound = sum_u * sum_w;

    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(basis_size);
    for (int l = 0; l < n_in; ++l)
      a += u[l] * sh_basis(ins[l].direction, basis_size);
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(basis_size);
    for (int z = 0; z < n_out; ++z)
      b += w[z] * sh_basis(outs[z].direction, basis_size);
    auto amplitude = [&](const Eigen::VectorXcd& c) {
      return std::abs((a.transpose() * c).value() * (b.transpose() * c).value());
    };

    // exact interpolation first (perfect alignment); merge progressively only
    // when near-coincident constraints push the interpolation energy so high
    // that the budget rescale would surrender the amplitude advantage, and
    // fall back to the unconstrained-alignment optimum as a last resort
    Eigen::VectorXcd best;
    double best_amp = -1.0;
    bool chosen = false;
    for (double threshold : {0.0, 0.1, 0.2, merge_threshold}) {
      Eigen::VectorXcd c;
      double e = solve_with_merge(std::cos(threshold), c);
      if (!(e > 0.0) || !c.allFinite()) continue;
      c *= std::sqrt(energy_budget / e);
      double amp = amplitude(c);
      if (amp > bound * (1.0 + 1e-9)) {
        best = c;
        chosen = true;
        break;
      }
      if (amp > best_amp) {
        best_amp = amp;
        best = c;
      }
    }
    if (!chosen) {
      Eigen::VectorXcd c = detail::link_optimal_coeffs(a, b, energy_budget);
      if (amplitude(c) > best_amp) best = c;
    }
    pc.coeffs.row(m) = best.transpose();
  }
  return pc;
}

/// Single-user convenience wrapper: lifts a ChannelPair into the multi-user
/// representation with a one-antenna BS.
inline MultiUserChannel lift_single_user(const ChannelPair& ch) {
  std::vector<BsArrayPath> bs;
  for (const HopPath& p : ch.bs_paths()) bs.push_back(BsArrayPath{p.gain, p.direction, 0.0});
  return MultiUserChannel(bs, {ch.user_paths()}, 1, ch.wavelength());
}

// ---------------------------------------------------------------------------
// Pattern objective and its gradient

/// Effective channels of every user for the given coefficients (reflection
/// phases frozen at zero in pattern mode).
inline std::vector<Eigen::VectorXcd> pattern_channels(const MuScenario& sc,
                                                      const ActivationMask& mask,
                                                      const PatternCoeffs& coeffs) {
  SurfaceState state{mask, ReflectionConfig::zeros(sc.geometry.elements()),
                     PatternSet::from_coeffs(coeffs)};
  std::vector<Eigen::VectorXcd> h;
  h.reserve(sc.channel.users());
  for (int k = 0; k < sc.channel.users(); ++k)
    h.push_back(effective_user_channel(sc.channel, sc.geometry, state, k));
  return h;
}

/// Weighted sum rate at fixed precoders, as a function of the coefficients.
inline double pattern_objective(const MuScenario& sc, const ActivationMask& mask,
                                const PatternCoeffs& coeffs, const PrecoderSet& precoders) {
  return weighted_sum_rate(pattern_channels(sc, mask, coeffs), precoders, sc.weights,
                           sc.noise_power);
}

/// Wirtinger gradient d(WSR)/d(conj c) of the fixed-precoder objective.
/// The channels are holomorphic in the coefficients (a product of two
/// coefficient-linear pattern evaluations), so the partials with respect to
/// the real and imaginary parts are 2*Re(G) and 2*Im(G).
inline Eigen::MatrixXcd pattern_objective_gradient(const MuScenario& sc,
                                                   const ActivationMask& mask,
                                                   const PatternCoeffs& coeffs,
                                                   const PrecoderSet& precoders) {
  const MultiUserChannel& mu = sc.channel;
  const int k_users = mu.users();
  const int nt = mu.bs_antennas();
  const int q = coeffs.basis_size();
  const double lambda = mu.wavelength();
  const double ln2 = std::log(2.0);

  std::vector<Eigen::VectorXcd> h = pattern_channels(sc, mask, coeffs);

  // gamma_k = d(WSR)/d(conj h_k)
  std::vector<Eigen::VectorXcd> gamma(k_users);
  for (int k = 0; k < k_users; ++k) {
    double sig = std::norm(h[k].dot(precoders.w[k]));
    double interf = sc.noise_power;
    for (int j = 0; j < k_users; ++j)
      if (j != k) interf += std::norm(h[k].dot(precoders.w[j]));
    Eigen::VectorXcd all = Eigen::VectorXcd::Zero(nt);
    Eigen::VectorXcd cross = Eigen::VectorXcd::Zero(nt);
    for (int j = 0; j < k_users; ++j) {
      Eigen::VectorXcd term = precoders.w[j] * (precoders.w[j].dot(h[k]));
      all += term;
      if (j != k) cross += term;
    }
    gamma[k] = (sc.weights[k] / ln2) * (all / (sig + interf) - cross / interf);
  }

  // sigma_{k,l} = sum_n gamma_{k,n} conj(s_{n,l})
  Eigen::MatrixXcd sig_kl(k_users, mu.l_paths());
  for (int k = 0; k < k_users; ++k)
    for (int l = 0; l < mu.l_paths(); ++l) {
      std::complex<double> acc = 0.0;
      for (int n = 0; n < nt; ++n) acc += gamma[k][n] * std::conj(mu.bs_steering(n, l));
      sig_kl(k, l) = acc;
    }

  // basis evaluations
  Eigen::MatrixXd y_inc(mu.l_paths(), q);
  for (int l = 0; l < mu.l_paths(); ++l)
    y_inc.row(l) = sh_basis(mu.bs_paths()[l].incidence, q).transpose();
  std::vector<Eigen::MatrixXd> y_dep(k_users);
  for (int k = 0; k < k_users; ++k) {
    const auto& deps = mu.user_paths(k);
    y_dep[k].resize(static_cast<int>(deps.size()), q);
    for (std::size_t z = 0; z < deps.size(); ++z)
      y_dep[k].row(static_cast<int>(z)) = sh_basis(deps[z].direction, q).transpose();
  }

  Eigen::MatrixXcd grad = Eigen::MatrixXcd::Zero(coeffs.elements(), q);
  for (int m = 0; m < coeffs.elements(); ++m) {
    if (!mask.is_active(m)) continue;
    const Eigen::Vector3d& p = sc.geometry.positions[m];
    Eigen::VectorXcd cm = coeffs.coeffs.row(m).transpose();
    for (int k = 0; k < k_users; ++k) {
      const auto& deps = mu.user_paths(k);
      for (int l = 0; l < mu.l_paths(); ++l) {
        const BsArrayPath& in = mu.bs_paths()[l];
        std::complex<double> f_inc = 0.0;
        for (int i = 0; i < q; ++i) f_inc += cm[i] * y_inc(l, i);
        // X_q = sum_z T_{l,z} (Y_q(inc) f(dep_z) + f(inc) Y_q(dep_z))
        Eigen::VectorXcd x = Eigen::VectorXcd::Zero(q);
        for (std::size_t z = 0; z < deps.size(); ++z) {
          const HopPath& out = deps[z];
          double phi = steering_phase(p, out.direction, in.incidence, lambda);
          std::complex<double> t = in.gain * out.gain * std::polar(1.0, phi);
          std::complex<double> f_dep = 0.0;
          for (int i = 0; i < q; ++i) f_dep += cm[i] * y_dep[k](static_cast<int>(z), i);
          for (int i = 0; i < q; ++i)
            x[i] += t * (y_inc(l, i) * f_dep + f_inc * y_dep[k](static_cast<int>(z), i));
        }
        for (int i = 0; i < q; ++i) grad(m, i) += sig_kl(k, l) * std::conj(x[i]);
      }
    }
  }
  return grad;
}

struct PatternOptResult {
  PatternCoeffs patterns;
  PrecoderSet precoders;
  double wsr = 0.0;
  std::vector<TraceRow> trace;
  std::vector<std::vector<double>> wmmse_traces;  ///< WSR trace of each inner solve
};

/// Alternating pattern/precoder optimization: WMMSE precoders for fixed
/// patterns, then projected-gradient ascent on the coefficients with
/// backtracking, initialized from the aligned-pattern synthesis (elements
/// round-robin assigned to users) or the isotropic pattern, whichever
/// starts better. Running-best WSR is non-decreasing and every iterate
/// satisfies the per-element energy budget.
inline PatternOptResult optimize_patterns(const MuScenario& sc, const PatternOptParams& params,
                                          std::uint64_t seed) {
  params.validate();
  if (!(sc.energy_budget > 0.0)) throw InvalidSpec("optimize_patterns: energy budget must be positive");
  (void)seed;  // deterministic initializers; kept for interface stability
  const int m_total = sc.geometry.elements();
  ActivationMask mask = ActivationMask::all_on(m_total);

  std::vector<int> assignment(m_total, 0);
  for (int m = 0, i = 0; m < m_total; ++m, ++i) assignment[m] = i % sc.channel.users();
  std::vector<PatternCoeffs> candidates;
  candidates.push_back(synthesize_aligned_pattern(sc.geometry, mask, sc.channel, sc.basis_size,
                                                  sc.energy_budget, assignment, true));
  if (sc.channel.users() > 1)
    candidates.push_back(synthesize_aligned_pattern(sc.geometry, mask, sc.channel, sc.basis_size,
                                                    sc.energy_budget, assignment, false));
  candidates.push_back(
      project_pattern_energy(PatternCoeffs::isotropic(m_total, sc.basis_size, sc.energy_budget)));

  PatternOptResult best;
  auto solve_precoders = [&](const PatternCoeffs& c, PrecoderSet& out) {
    WmmseResult w = wmmse_precoders(pattern_channels(sc, mask, c), sc.weights, sc.power_budget,
                                    sc.noise_power, params.wmmse_iterations);
    out = std::move(w.precoders);
    best.wmmse_traces.push_back(std::move(w.wsr_trace));
    return weighted_sum_rate(pattern_channels(sc, mask, c), out, sc.weights, sc.noise_power);
  };

  PatternCoeffs current;
  bool first = true;
  for (const PatternCoeffs& cand : candidates) {
    PrecoderSet p;
    double w = solve_precoders(cand, p);
    if (first || w > best.wsr) {
      current = cand;
      best.patterns = cand;
      best.precoders = std::move(p);
      best.wsr = w;
      first = false;
    }
  }
  PrecoderSet precoders = best.precoders;
  double current_wsr = best.wsr;
  best.trace.push_back(TraceRow{0, best.wsr, current_wsr, 0.0});

  double rel_step = params.step_size;  // step length relative to the coefficient norm
  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    Eigen::MatrixXcd grad = pattern_objective_gradient(sc, mask, current, precoders);
    double gnorm = grad.norm();
    if (!(gnorm > 0.0)) break;
    double base = pattern_objective(sc, mask, current, precoders);
    double step = rel_step * std::max(current.coeffs.norm(), 1.0) / gnorm;
    bool improved = false;
    PatternCoeffs trial = current;
    for (int h = 0; h <= params.max_halvings; ++h) {
      trial.coeffs = current.coeffs + step * grad;
      trial = project_pattern_energy(trial);
      if (pattern_objective(sc, mask, trial, precoders) > base + 1e-12) {
        improved = true;
        // adapt the relative step: grow after a clean success, keep the
        // shrunken value after backtracking
        rel_step = h == 0 ? std::min(rel_step / params.backtracking, 1e3)
                          : rel_step * std::pow(params.backtracking, h);
        break;
      }
      step *= params.backtracking;
    }
    if (!improved) break;
    current = trial;
    PrecoderSet updated;
    current_wsr = solve_precoders(current, updated);
    precoders = updated;
    if (current_wsr > best.wsr) {
      best.wsr = current_wsr;
      best.patterns = current;
      best.precoders = precoders;
    }
    best.trace.push_back(TraceRow{iter, best.wsr, current_wsr, 0.0});
  }
  return best;
}

}  // namespace fris
