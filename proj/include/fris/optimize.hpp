#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "fris/metrics.hpp"
#include "fris/rng.hpp"

namespace fris {

/// One optimizer trace row (serialized to trace CSVs).
struct TraceRow {
  int iteration = 0;
  double best_objective = 0.0;
  double mean_objective = 0.0;
  double entropy = 0.0;
};

// ---------------------------------------------------------------------------
// Closed-form phase alignment (traditional RIS passive beamforming)

/// Phases that align every active element's aggregate phasor: the coherent
/// combining optimum for continuous phases. Quantizes afterwards when the
/// incoming config carries a bit depth.
inline ReflectionConfig align_phases_closed_form(const Scenario& scenario,
                                                 const SurfaceState& state) {
  ReflectionConfig out = state.reflection;
  for (int m = 0; m < scenario.geometry.elements(); ++m) {
    if (!state.mask.is_active(m)) {
      out.phases[m] = 0.0;
      continue;
    }
    std::complex<double> c = per_element_aggregate(scenario, state, m);
    out.phases[m] = c == 0.0 ? 0.0 : wrap_phase(-std::arg(c));
  }
  out.quantize();
  return out;
}

// ---------------------------------------------------------------------------
// Phase-spread diagnostic

/// Circular spread 1 - |sum exp(j angle)| / n over the nonzero phasors;
/// zero at perfect alignment, one at full cancellation.
inline double phase_spread(const std::vector<std::complex<double>>& phasors) {
  std::complex<double> resultant = 0.0;
  int n = 0;
  for (const auto& x : phasors) {
    if (std::abs(x) == 0.0) continue;
    resultant += x / std::abs(x);
    ++n;
  }
  if (n == 0) throw InvalidSpec("phase_spread: all phasors are zero");
  return 1.0 - std::abs(resultant) / n;
}

/// Post-modulation phasor of each cascaded (l, z) path:
/// sum_m theta_m g_{l,z} f_eff(m,l,z) exp(j phi_{m,l,z}).
inline std::vector<std::complex<double>> path_phasors(const Scenario& scenario,
                                                      const SurfaceState& state) {
  check_state(scenario, state);
  const ChannelPair& ch = scenario.channel;
  std::vector<std::complex<double>> out;
  out.reserve(static_cast<std::size_t>(ch.l_paths()) * ch.z_paths());
  for (int l = 0; l < ch.l_paths(); ++l) {
    for (int z = 0; z < ch.z_paths(); ++z) {
      const HopPath& in = ch.bs_paths()[l];
      const HopPath& dep = ch.user_paths()[z];
      std::complex<double> acc = 0.0;
      for (int m = 0; m < scenario.geometry.elements(); ++m) {
        if (!state.mask.is_active(m)) continue;
        double phi = steering_phase(scenario.geometry.positions[m], dep.direction, in.direction,
                                    ch.wavelength());
        acc += state.reflection.coefficient(m) * in.gain * dep.gain *
               state.patterns.effective(m, in.direction, dep.direction) * std::polar(1.0, phi);
      }
      out.push_back(acc);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete position/phase search (position-reconfigurable FRIS)

struct CeoParams {
  int population = 200;
  double elite_fraction = 0.1;
  double smoothing = 0.7;
  int max_iterations = 100;
  double mode_threshold = 0.99;

  void validate() const {
    if (population < 10) throw InvalidSpec("CeoParams: population must be >= 10");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0))
      throw InvalidSpec("CeoParams: elite_fraction must be in (0,1)");
    if (!(smoothing > 0.0 && smoothing <= 1.0))
      throw InvalidSpec("CeoParams: smoothing must be in (0,1]");
    if (max_iterations < 1) throw InvalidSpec("CeoParams: max_iterations must be >= 1");
  }
};

/// Discrete decision space: choose `active_count` of M positions, plus a
/// 2^bits phase codeword per active element. Empty bits means continuous
/// phases, closed-form aligned per candidate mask.
struct DiscreteProblem {
  Scenario scenario;
  int active_count = 1;
  std::optional<int> bits;

  void validate() const {
    int m = scenario.geometry.elements();
    if (active_count < 1 || active_count > m)
      throw InvalidSpec("DiscreteProblem: active_count out of range");
    if (bits && *bits < 1) throw InvalidSpec("DiscreteProblem: bits must be >= 1");
  }

  [[nodiscard]] double search_space_size() const {
    int m = scenario.geometry.elements();
    double comb = 1.0;
    for (int i = 0; i < active_count; ++i) comb = comb * (m - i) / (i + 1);
    double per = bits ? std::pow(2.0, *bits) : 1.0;
    return comb * std::pow(per, active_count);
  }
};

struct DiscreteResult {
  SurfaceState state;
  double objective = 0.0;
  std::vector<TraceRow> trace;
};

namespace detail {

/// Build and score one candidate: mask indices + either explicit codewords
/// or closed-form aligned (quantized) phases.
inline std::pair<SurfaceState, double> evaluate_candidate(const DiscreteProblem& problem,
                                                          const std::vector<int>& indices,
                                                          const std::vector<int>* codewords) {
  int m = problem.scenario.geometry.elements();
  SurfaceState state{ActivationMask::from_indices(m, indices), ReflectionConfig::zeros(m, problem.bits),
                     PatternSet::isotropic()};
  if (codewords) {
    double step = kTwoPi / (1 << *problem.bits);
    for (std::size_t i = 0; i < indices.size(); ++i)
      state.reflection.phases[indices[i]] = (*codewords)[i] * step;
  } else {
    state.reflection = align_phases_closed_form(problem.scenario, state);
  }
  double rate = achievable_rate(received_power(problem.scenario, state),
                                problem.scenario.noise_power);
  return {std::move(state), rate};
}

inline double categorical_entropy(const std::vector<double>& p) {
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double x : p) {
    double q = x / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

}  // namespace detail

/// Exhaustive enumeration oracle. Deterministic lexicographic tie-break:
/// the first configuration attaining the optimum wins.
inline DiscreteResult brute_force_discrete(const DiscreteProblem& problem,
                                           double max_space = 1e7) {
  problem.validate();
  double space = problem.search_space_size();
  if (space > max_space)
    throw InvalidSpec("brute_force_discrete: search space of " + std::to_string(space) +
                      " configurations exceeds the guard of " + std::to_string(max_space));
  int m = problem.scenario.geometry.elements();
  int mhat = problem.active_count;
  std::vector<int> indices(mhat);
  std::iota(indices.begin(), indices.end(), 0);
  DiscreteResult best;
  bool have_best = false;
  auto consider = [&](const std::vector<int>& idx, const std::vector<int>* codes) {
    auto [state, rate] = detail::evaluate_candidate(problem, idx, codes);
    if (!have_best || rate > best.objective) {
      best.state = std::move(state);
      best.objective = rate;
      have_best = true;
    }
  };
  while (true) {
    if (problem.bits) {
      int levels = 1 << *problem.bits;
      std::vector<int> codes(mhat, 0);
      while (true) {
        consider(indices, &codes);
        int pos = mhat - 1;
        while (pos >= 0 && codes[pos] == levels - 1) codes[pos--] = 0;
        if (pos < 0) break;
        ++codes[pos];
      }
    } else {
      consider(indices, nullptr);
    }
    // next combination, lexicographic
    int pos = mhat - 1;
    while (pos >= 0 && indices[pos] == m - mhat + pos) --pos;
    if (pos < 0) break;
    ++indices[pos];
    for (int i = pos + 1; i < mhat; ++i) indices[i] = indices[i - 1] + 1;
  }
  return best;
}

/// Cross-entropy search over activation masks and discrete phase codewords.
/// Maintains per-position inclusion probabilities (masks sampled without
/// replacement) and per-position codeword tables; both are smoothed toward
/// the elite empirical frequencies each iteration. The uniform traditional
/// layout with aligned phases is injected into the first population, so the
/// returned best is never worse than the traditional benchmark.
inline DiscreteResult cross_entropy_search(const DiscreteProblem& problem, const CeoParams& params,
                                           std::uint64_t seed) {
  problem.validate();
  params.validate();
  const int m = problem.scenario.geometry.elements();
  const int mhat = problem.active_count;
  const int levels = problem.bits ? (1 << *problem.bits) : 0;
  const int n_elite = std::max(1, static_cast<int>(std::ceil(params.elite_fraction * params.population)));

  std::vector<double> incl(m, double(mhat) / m);
  std::vector<std::vector<double>> phase_tab;
  if (problem.bits)
    phase_tab.assign(m, std::vector<double>(levels, 1.0 / levels));

  Rng root = Rng::from_seed(seed).derive(0x63656fULL);  // CEO stream

  struct Candidate {
    std::vector<int> indices;
    std::vector<int> codes;
    double objective;
  };

  DiscreteResult result;
  bool have_best = false;
  auto keep_best = [&](const Candidate& c) {
    if (!have_best || c.objective > result.objective) {
      auto [state, rate] =
          detail::evaluate_candidate(problem, c.indices, problem.bits ? &c.codes : nullptr);
      result.state = std::move(state);
      result.objective = rate;
      have_best = true;
    }
  };

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    std::vector<Candidate> pop(params.population);
    double sum_obj = 0.0;
    for (int i = 0; i < params.population; ++i) {
      Candidate& c = pop[i];
      Rng rng = root.derive((std::uint64_t(iter) << 32) | std::uint64_t(i));
      if (iter == 0 && i == 0) {
        // seeded traditional benchmark configuration
        c.indices = uniform_layout_indices(problem.scenario.geometry.rows,
                                           problem.scenario.geometry.cols, mhat);
        if (problem.bits) {
          SurfaceState s{ActivationMask::from_indices(m, c.indices),
                         ReflectionConfig::zeros(m, problem.bits), PatternSet::isotropic()};
          ReflectionConfig aligned = align_phases_closed_form(problem.scenario, s);
          double step = kTwoPi / levels;
          c.codes.resize(mhat);
          for (int j = 0; j < mhat; ++j)
            c.codes[j] =
                static_cast<int>(std::lround(aligned.phases[c.indices[j]] / step)) % levels;
        }
      } else {
        std::vector<double> weights = incl;
        double nonzero = 0.0;
        for (double w : weights) nonzero += w > 0.0;
        if (nonzero < mhat)
          for (double& w : weights) w += 1e-9;
        c.indices.reserve(mhat);
        for (int pick = 0; pick < mhat; ++pick) {
          std::size_t idx = rng.categorical(weights);
          c.indices.push_back(static_cast<int>(idx));
          weights[idx] = 0.0;
        }
        std::sort(c.indices.begin(), c.indices.end());
        if (problem.bits) {
          c.codes.resize(mhat);
          for (int j = 0; j < mhat; ++j)
            c.codes[j] = static_cast<int>(rng.categorical(phase_tab[c.indices[j]]));
        }
      }
      auto [state, rate] =
          detail::evaluate_candidate(problem, c.indices, problem.bits ? &c.codes : nullptr);
      (void)state;
      c.objective = rate;
      sum_obj += rate;
    }

    std::vector<int> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return pop[a].objective > pop[b].objective; });
    keep_best(pop[order[0]]);

    // elite empirical frequencies
    std::vector<double> freq(m, 0.0);
    std::vector<std::vector<double>> code_count;
    std::vector<double> appearances(m, 0.0);
    if (problem.bits) code_count.assign(m, std::vector<double>(levels, 0.0));
    for (int e = 0; e < n_elite; ++e) {
      const Candidate& c = pop[order[e]];
      for (std::size_t j = 0; j < c.indices.size(); ++j) {
        int pos = c.indices[j];
        freq[pos] += 1.0;
        appearances[pos] += 1.0;
        if (problem.bits) code_count[pos][c.codes[j]] += 1.0;
      }
    }
    double alpha = params.smoothing;
    for (int p = 0; p < m; ++p) {
      incl[p] = (1.0 - alpha) * incl[p] + alpha * freq[p] / n_elite;
      if (problem.bits && appearances[p] > 0.0)
        for (int k = 0; k < levels; ++k)
          phase_tab[p][k] =
              (1.0 - alpha) * phase_tab[p][k] + alpha * code_count[p][k] / appearances[p];
    }

    double entropy = detail::categorical_entropy(incl);
    result.trace.push_back(
        TraceRow{iter, result.objective, sum_obj / params.population, entropy});

    bool converged = true;
    for (int p = 0; p < m && converged; ++p) {
      if (incl[p] > 1.0 - params.mode_threshold && incl[p] < params.mode_threshold)
        converged = false;
      if (problem.bits && incl[p] >= 0.5) {
        double mode = *std::max_element(phase_tab[p].begin(), phase_tab[p].end());
        if (mode < params.mode_threshold) converged = false;
      }
    }
    if (converged) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Continuous position refinement (first-type position FRIS)

/// Coordinate-wise golden-section refinement of each active element's
/// in-plane position within +/- half_cell of its lattice point, realigning
/// phases closed-form at every probe. Minimal model of motor-driven element
/// movement; not part of the benchmark suites.
inline std::pair<Scenario, double> refine_positions_continuous(Scenario scenario,
                                                               const SurfaceState& state,
                                                               double half_cell, int sweeps = 2) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  auto power_with = [&](const Scenario& sc) {
    SurfaceState s = state;
    s.reflection = align_phases_closed_form(sc, s);
    return received_power(sc, s);
  };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int m = 0; m < scenario.geometry.elements(); ++m) {
      if (!state.mask.is_active(m)) continue;
      for (int axis = 0; axis < 2; ++axis) {
        double center = scenario.geometry.positions[m][axis];
        double lo = center - half_cell, hi = center + half_cell;
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        auto eval_at = [&](double v) {
          Scenario sc = scenario;
          sc.geometry.positions[m][axis] = v;
          return power_with(sc);
        };
        double f1 = eval_at(x1), f2 = eval_at(x2);
        for (int it = 0; it < 30; ++it) {
          if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = eval_at(x2);
          } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = eval_at(x1);
          }
        }
        double mid = (lo + hi) / 2.0;
        if (eval_at(mid) > power_with(scenario))
          scenario.geometry.positions[m][axis] = mid;
      }
    }
  }
  return {scenario, power_with(scenario)};
}

}  // namespace fris
