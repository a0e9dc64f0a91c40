#include <doctest.h>

#include "fris/baselines.hpp"
#include "fris/pattern_opt.hpp"

using namespace fris;

namespace {

MuScenario desk_mu(std::uint64_t seed, int rows, int cols, int users, int nt, int l = 2,
                   int z = 2) {
  MultiUserSpec spec{l, z, users, nt, 0.1};
  MuScenario sc{grid_positions(rows, cols, 0.05), sample_multiuser(seed, spec), 1e-2,
                std::vector<double>(users, 1.0 / users), 1.0};
  return sc;
}

}  // namespace

TEST_CASE("WMMSE reaches the single-user matched-filter optimum") {
  Rng rng = Rng::from_seed(3);
  Eigen::VectorXcd h(4);
  for (int i = 0; i < 4; ++i) h[i] = rng.complex_normal();
  double p = 2.0, noise = 0.05;
  WmmseResult r = wmmse_precoders({h}, {1.0}, p, noise, 60);
  double expect = std::log2(1.0 + p * h.squaredNorm() / noise);
  CHECK(weighted_sum_rate({h}, r.precoders, {1.0}, noise) == doctest::Approx(expect).epsilon(1e-6));
  CHECK(r.precoders.total_power() <= p + 1e-9);
}

TEST_CASE("WMMSE on orthogonal channels waterfills with no cross-interference") {
  Eigen::VectorXcd h1 = Eigen::VectorXcd::Zero(4), h2 = Eigen::VectorXcd::Zero(4);
  h1[0] = 2.0;
  h2[2] = 1.0;
  double p = 1.0, noise = 0.1;
  WmmseResult r = wmmse_precoders({h1, h2}, {1.0, 1.0}, p, noise, 200);
  CHECK(std::norm(h1.dot(r.precoders.w[1])) < 1e-12);
  CHECK(std::norm(h2.dot(r.precoders.w[0])) < 1e-12);
  // classic two-channel waterfilling at gains |h|^2 / noise
  double g1 = h1.squaredNorm() / noise, g2 = h2.squaredNorm() / noise;
  double mu = (p + 1.0 / g1 + 1.0 / g2) / 2.0;
  double p1 = mu - 1.0 / g1, p2 = mu - 1.0 / g2;
  double expect = std::log2(1.0 + p1 * g1) + std::log2(1.0 + p2 * g2);
  CHECK(weighted_sum_rate({h1, h2}, r.precoders, {1.0, 1.0}, noise) ==
        doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("WMMSE zero channels and monotone trace") {
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(3);
  WmmseResult r0 = wmmse_precoders({z, z}, {0.5, 0.5}, 1.0, 0.1, 10);
  for (const auto& w : r0.precoders.w) CHECK(w.norm() == 0.0);
  CHECK(weighted_sum_rate({z, z}, r0.precoders, {0.5, 0.5}, 0.1) == 0.0);

  MuScenario sc = desk_mu(5, 3, 3, 2, 4);
  SurfaceState st{ActivationMask::all_on(9), ReflectionConfig::zeros(9), PatternSet::isotropic()};
  std::vector<Eigen::VectorXcd> h;
  for (int k = 0; k < 2; ++k) h.push_back(effective_user_channel(sc.channel, sc.geometry, st, k));
  WmmseResult r = wmmse_precoders(h, sc.weights, sc.power_budget, sc.noise_power, 30);
  for (std::size_t i = 1; i < r.wsr_trace.size(); ++i)
    CHECK(r.wsr_trace[i] >= r.wsr_trace[i - 1] - 1e-9);
  CHECK(r.precoders.total_power() <= sc.power_budget + 1e-9);
}

TEST_CASE("aligned synthesis brings every path into phase (L=1, Z=4 demo)") {
  ChannelPair ch = sample_multipath(99, ChannelSpec{1, 4, 0.1});
  SurfaceGeometry g = grid_positions(2, 2, 0.05);
  ActivationMask mask = ActivationMask::all_on(4);
  MultiUserChannel mu = lift_single_user(ch);
  PatternCoeffs pc = synthesize_aligned_pattern(g, mask, mu, 16, default_energy_budget());

  Scenario sc{g, ch, 0.0, SurfaceMode::pattern_fris};
  SurfaceState st{mask, ReflectionConfig::zeros(4), PatternSet::from_coeffs(pc)};
  auto phasors = path_phasors(sc, st);
  REQUIRE(phasors.size() == 4);
  for (std::size_t i = 0; i < phasors.size(); ++i)
    for (std::size_t j = i + 1; j < phasors.size(); ++j) {
      double diff = std::fabs(wrap_phase(std::arg(phasors[i]) - std::arg(phasors[j])));
      CHECK(diff <= 5.0 * kPi / 180.0);
    }
  CHECK(phase_spread(phasors) < 1e-6);

  // scaled interpolation dominates the isotropic coherent bound
  SurfaceState iso{mask, ReflectionConfig::zeros(4), PatternSet::isotropic()};
  iso.reflection = align_phases_closed_form(sc, iso);
  CHECK(received_power(sc, st) + 1e-9 >= received_power(sc, iso));
  // budget respected
  for (int m = 0; m < 4; ++m)
    CHECK(pc.coeffs.row(m).squaredNorm() <= pc.energy_budget + 1e-9);
}

TEST_CASE("pattern gradient matches central finite differences") {
  MuScenario sc = desk_mu(7, 2, 2, 2, 3);
  ActivationMask mask = ActivationMask::all_on(4);
  Rng rng = Rng::from_seed(17);
  for (int trial = 0; trial < 10; ++trial) {
    PatternCoeffs pc;
    pc.coeffs = Eigen::MatrixXcd(4, sc.basis_size);
    for (int m = 0; m < 4; ++m)
      for (int q = 0; q < sc.basis_size; ++q) pc.coeffs(m, q) = rng.complex_normal();
    pc.energy_budget = sc.energy_budget;
    WmmseResult w = wmmse_precoders(pattern_channels(sc, mask, pc), sc.weights, sc.power_budget,
                                    sc.noise_power, 10);

    Eigen::MatrixXcd g = pattern_objective_gradient(sc, mask, pc, w.precoders);
    Eigen::MatrixXcd fd = Eigen::MatrixXcd::Zero(4, sc.basis_size);
    double h = 1e-6;
    for (int m = 0; m < 4; ++m)
      for (int q = 0; q < sc.basis_size; ++q) {
        PatternCoeffs plus = pc, minus = pc;
        plus.coeffs(m, q) += h;
        minus.coeffs(m, q) -= h;
        double dre = (pattern_objective(sc, mask, plus, w.precoders) -
                      pattern_objective(sc, mask, minus, w.precoders)) /
                     (2.0 * h);
        plus = pc;
        minus = pc;
        plus.coeffs(m, q) += std::complex<double>(0.0, h);
        minus.coeffs(m, q) -= std::complex<double>(0.0, h);
        double dim = (pattern_objective(sc, mask, plus, w.precoders) -
                      pattern_objective(sc, mask, minus, w.precoders)) /
                     (2.0 * h);
        fd(m, q) = std::complex<double>(dre, dim) / 2.0;  // = d/d(conj c)
      }
    CHECK((g - fd).norm() <= 1e-4 * fd.norm());
  }
}

TEST_CASE("optimize_patterns improves on the fixed baselines") {
  MuScenario sc = desk_mu(11, 3, 3, 2, 4);
  PatternOptParams params;
  params.max_iterations = 15;
  PatternOptResult r = optimize_patterns(sc, params, 1);

  for (std::size_t i = 1; i < r.trace.size(); ++i)
    CHECK(r.trace[i].best_objective >= r.trace[i - 1].best_objective);
  for (const auto& t : r.wmmse_traces)
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] >= t[i - 1] - 1e-9);
  for (int m = 0; m < r.patterns.elements(); ++m)
    CHECK(r.patterns.coeffs.row(m).squaredNorm() <= sc.energy_budget + 1e-9);

  MuBaselineResult iso = traditional_mu_baseline(sc.channel, sc.geometry, PatternSet::isotropic(),
                                                 sc.weights, sc.power_budget, sc.noise_power, 30);
  MuBaselineResult std_pat = traditional_mu_baseline(sc.channel, sc.geometry, PatternSet::tr38901(),
                                                     sc.weights, sc.power_budget, sc.noise_power, 30);
  CHECK(r.wsr > iso.wsr);
  CHECK(r.wsr > std_pat.wsr);
}

TEST_CASE("single cascaded path concentrates the pattern") {
  MuScenario sc = desk_mu(13, 2, 2, 1, 1, 1, 1);
  PatternOptParams params;
  params.max_iterations = 10;
  PatternOptResult r = optimize_patterns(sc, params, 2);

  PatternCoeffs iso = PatternCoeffs::isotropic(4, sc.basis_size, sc.energy_budget);
  WmmseResult wi = wmmse_precoders(pattern_channels(sc, ActivationMask::all_on(4), iso), sc.weights,
                                   sc.power_budget, sc.noise_power, 30);
  double iso_wsr = weighted_sum_rate(pattern_channels(sc, ActivationMask::all_on(4), iso),
                                     wi.precoders, sc.weights, sc.noise_power);
  CHECK(r.wsr >= iso_wsr - 1e-9);

  // optimized element gain points at the path's direction pair
  const Direction& dep = sc.channel.user_paths(0)[0].direction;
  Rng rng = Rng::from_seed(23);
  double at_path = std::abs(pattern_gain(r.patterns.coeffs.row(0).transpose(), dep));
  int beaten = 0;
  for (int i = 0; i < 50; ++i) {
    Direction d = Direction::from_angles(rng.uniform(-kPi, kPi), rng.uniform(0.2, kPi - 0.2));
    if (std::abs(pattern_gain(r.patterns.coeffs.row(0).transpose(), d)) > at_path) ++beaten;
  }
  CHECK(beaten <= 5);
}

TEST_CASE("optimize_patterns rejects a zero energy budget") {
  MuScenario sc = desk_mu(3, 2, 2, 2, 3);
  sc.energy_budget = 0.0;
  CHECK_THROWS_AS(optimize_patterns(sc, PatternOptParams{}, 0), InvalidSpec);
}

TEST_CASE("per-user phase alignment is the coordinate-ascent optimum direction") {
  MuScenario sc = desk_mu(31, 3, 3, 2, 4);
  ActivationMask mask = ActivationMask::all_on(9);
  auto v = element_channel_vectors(sc.channel, sc.geometry, mask, PatternSet::isotropic());
  ReflectionConfig aligned = align_phases_to_user(v[0], mask);
  SurfaceState st{mask, aligned, PatternSet::isotropic()};
  double norm_aligned = effective_user_channel(sc.channel, sc.geometry, st, 0).squaredNorm();
  // any single-element perturbation should not help
  Rng rng = Rng::from_seed(41);
  for (int i = 0; i < 30; ++i) {
    SurfaceState probe = st;
    int m = static_cast<int>(rng.next_u64() % 9);
    probe.reflection.phases[m] = rng.uniform(-kPi, kPi);
    double norm_probe = effective_user_channel(sc.channel, sc.geometry, probe, 0).squaredNorm();
    CHECK(norm_probe <= norm_aligned + 1e-9);
  }
}
