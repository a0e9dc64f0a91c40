#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fris/baselines.hpp"
#include "fris/config.hpp"
#include "fris/optimize.hpp"
#include "fris/pattern_opt.hpp"

namespace fris {

/// One experiment output row. Runtimes are kept out of this record (and out
/// of results.csv) so that identical (config, seed) runs produce identical
/// bytes regardless of machine load or worker count; they are reported
/// separately in timings.csv.
struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string mode;
  std::string grid;
  int active = 0;  ///< number of active elements
  int param = 0;   ///< phase bits (case1) or basis size (case2)
  int nt = 0;      ///< BS antennas (0 when single-antenna)
  double objective = 0.0;
};

struct NamedTrace {
  std::string name;  ///< trace file stem, e.g. "case1_6x6_m16_b1_s3"
  std::vector<TraceRow> rows;
};

struct CellTiming {
  std::string label;
  long long milliseconds = 0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline void run_parallel(int jobs, int threads, const std::function<void(int)>& work) {
  if (threads <= 1) {
    for (int i = 0; i < jobs; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int n = std::min(threads, jobs);
  pool.reserve(n);
  for (int t = 0; t < n; ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) work(i);
    });
  for (auto& th : pool) th.join();
}

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Path-aware modulation demo (single channel, all three surface modes)

struct DemoModeReport {
  std::string mode;
  SurfaceState state;
  double power = 0.0;
  double rate = 0.0;
  double spread = 0.0;
  std::vector<std::complex<double>> phasors;  ///< post-modulation per-path phasors
};

struct DemoReport {
  std::uint64_t seed = 0;
  ChannelPair channel{{HopPath{1.0, Direction(Eigen::Vector3d(1, 0, 0))}},
                      {HopPath{1.0, Direction(Eigen::Vector3d(1, 0, 0))}},
                      1.0};
  std::vector<std::complex<double>> input_phasors;  ///< per-path phasors before modulation
  std::vector<DemoModeReport> modes;                ///< traditional, position, pattern
  std::vector<TraceRow> position_trace;
};

/// Optimize one sampled channel under all three surface modes and collect
/// the per-path phasors, spreads and received powers behind the comparison:
///  - traditional: uniform element layout, continuous aligned phases;
///  - position: cross-entropy search over activation masks (aligned phases);
///  - pattern: harmonic coefficients interpolated to put every path in phase.
inline DemoReport run_demo_path_aware(const ExperimentConfig& config, std::uint64_t seed) {
  ChannelSpec spec{config.l_paths, config.z_paths, config.wavelength};
  DemoReport report;
  report.seed = seed;
  report.channel = sample_multipath(seed, spec);

  const GridSize& grid = config.grids.front();
  SurfaceGeometry geometry = grid_positions(grid.rows, grid.cols, config.spacing());
  int mhat = config.active_counts.front();
  int m = geometry.elements();

  // pre-modulation path phasors: unit reflection at the origin element
  for (const HopPath& in : report.channel.bs_paths())
    for (const HopPath& out : report.channel.user_paths())
      report.input_phasors.push_back(in.gain * out.gain);

  Scenario sc{geometry, report.channel, config.noise_power, SurfaceMode::traditional};
  auto mode_report = [&](const std::string& name, const SurfaceState& st) {
    DemoModeReport r;
    r.mode = name;
    r.state = st;
    r.power = received_power(sc, st);
    r.rate = achievable_rate(r.power, sc.noise_power);
    r.phasors = path_phasors(sc, st);
    r.spread = phase_spread(r.phasors);
    return r;
  };

  ActivationMask uniform = ActivationMask::from_indices(
      m, uniform_layout_indices(grid.rows, grid.cols, mhat));

  SurfaceState trad{uniform, ReflectionConfig::zeros(m), PatternSet::isotropic()};
  trad.reflection = align_phases_closed_form(sc, trad);
  report.modes.push_back(mode_report("traditional", trad));

  DiscreteProblem problem{sc, mhat, std::nullopt};
  DiscreteResult pos = cross_entropy_search(problem, config.ceo, seed);
  report.modes.push_back(mode_report("position_fris", pos.state));
  report.position_trace = std::move(pos.trace);

  PatternCoeffs pc = interpolate_aligned_pattern(geometry, uniform, report.channel,
                                                 config.basis_size, config.energy_budget());
  SurfaceState pat{uniform, ReflectionConfig::zeros(m), PatternSet::from_coeffs(pc)};
  report.modes.push_back(mode_report("pattern_fris", pat));
  return report;
}

inline nlohmann::ordered_json demo_report_json(const ExperimentConfig& config,
                                               const DemoReport& report) {
  nlohmann::ordered_json j;
  j["experiment"] = "demo";
  j["seed"] = report.seed;
  j["channel"] = to_json(report.channel);
  auto phasor_array = [](const std::vector<std::complex<double>>& ps) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : ps) arr.push_back({p.real(), p.imag()});
    return arr;
  };
  j["input_phasors"] = phasor_array(report.input_phasors);
  auto modes = nlohmann::ordered_json::array();
  const GridSize& grid = config.grids.front();
  SurfaceGeometry geometry = grid_positions(grid.rows, grid.cols, config.spacing());
  for (const auto& mr : report.modes) {
    nlohmann::ordered_json mj;
    mj["mode"] = mr.mode;
    mj["received_power"] = mr.power;
    mj["rate"] = mr.rate;
    mj["phase_spread"] = mr.spread;
    mj["path_phasors"] = phasor_array(mr.phasors);
    mj["surface"] = surface_state_json(geometry, mr.state.mask, mr.state.reflection,
                                       mr.state.patterns);
    modes.push_back(std::move(mj));
  }
  j["modes"] = std::move(modes);
  return j;
}

// ---------------------------------------------------------------------------
// Case 1: achievable rate versus grid size (position-reconfigurable surface)

struct Case1Cell {
  GridSize grid;
  int mhat = 0;
  int bits = 0;
  std::uint64_t seed = 0;
  double traditional_rate = 0.0;
  DiscreteResult fris;
  long long milliseconds = 0;
};

struct Case1Output {
  std::vector<Case1Cell> cells;      ///< canonical (grid, mhat, bits, seed) order
  std::vector<ResultRow> rows;       ///< two per cell
  std::vector<NamedTrace> traces;    ///< one CEO trace per cell
  std::vector<CellTiming> timings;
  nlohmann::ordered_json report;
};

/// Sweep (grid, active count, phase bits, seed); each cell pits the
/// uniform-layout traditional baseline against the cross-entropy search on
/// the same channel realization. Cells run concurrently; outputs are
/// assembled in canonical order after the sweep.
inline Case1Output run_case1(const ExperimentConfig& config, int threads = 1) {
  std::vector<Case1Cell> cells;
  for (const GridSize& grid : config.grids)
    for (int mhat : config.active_counts)
      for (int b : config.bits)
        for (std::uint64_t seed : config.seeds)
          cells.push_back(Case1Cell{grid, mhat, b, seed});

  detail::run_parallel(static_cast<int>(cells.size()), threads, [&](int i) {
    Case1Cell& cell = cells[i];
    detail::StopWatch watch;
    ChannelPair ch = sample_multipath(cell.seed,
                                      ChannelSpec{config.l_paths, config.z_paths, config.wavelength});
    SurfaceGeometry geometry = grid_positions(cell.grid.rows, cell.grid.cols, config.spacing());
    Scenario sc{geometry, ch, config.noise_power, SurfaceMode::position_fris};

    SurfaceState trad{ActivationMask::from_indices(
                          geometry.elements(),
                          uniform_layout_indices(cell.grid.rows, cell.grid.cols, cell.mhat)),
                      ReflectionConfig::zeros(geometry.elements(), cell.bits),
                      PatternSet::isotropic()};
    trad.reflection = align_phases_closed_form(sc, trad);
    cell.traditional_rate = achievable_rate(received_power(sc, trad), sc.noise_power);

    cell.fris = cross_entropy_search(DiscreteProblem{sc, cell.mhat, cell.bits}, config.ceo,
                                     cell.seed);
    cell.milliseconds = watch.ms();
  });

  Case1Output out;
  for (const Case1Cell& cell : cells) {
    std::string label = cell.grid.label();
    out.rows.push_back(ResultRow{"case1", cell.seed, "traditional", label, cell.mhat, cell.bits, 0,
                                 cell.traditional_rate});
    out.rows.push_back(ResultRow{"case1", cell.seed, "position_fris", label, cell.mhat, cell.bits,
                                 0, cell.fris.objective});
    std::string stem = "case1_" + label + "_m" + std::to_string(cell.mhat) + "_b" +
                       std::to_string(cell.bits) + "_s" + std::to_string(cell.seed);
    out.traces.push_back(NamedTrace{stem, cell.fris.trace});
    out.timings.push_back(CellTiming{stem, cell.milliseconds});
  }

  // summary: per configuration, median rates and relative gain
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  for (const GridSize& grid : config.grids)
    for (int mhat : config.active_counts)
      for (int b : config.bits) {
        std::vector<double> trad, fris;
        for (const Case1Cell& cell : cells)
          if (cell.grid.rows == grid.rows && cell.grid.cols == grid.cols && cell.mhat == mhat &&
              cell.bits == b) {
            trad.push_back(cell.traditional_rate);
            fris.push_back(cell.fris.objective);
          }
        nlohmann::ordered_json s;
        s["grid"] = grid.label();
        s["active"] = mhat;
        s["bits"] = b;
        s["median_traditional_rate"] = median(trad);
        s["median_fris_rate"] = median(fris);
        std::vector<double> gains;
        for (std::size_t i = 0; i < trad.size(); ++i)
          gains.push_back(trad[i] > 0.0 ? (fris[i] - trad[i]) / trad[i] : 0.0);
        s["median_relative_gain"] = median(gains);
        summary.push_back(std::move(s));
      }
  out.report["experiment"] = "case1";
  out.report["summary"] = std::move(summary);

  // activation map of the best run of the first configuration
  {
    const Case1Cell* best = nullptr;
    for (const Case1Cell& cell : cells) {
      if (cell.grid.rows != cells.front().grid.rows || cell.grid.cols != cells.front().grid.cols ||
          cell.mhat != cells.front().mhat || cell.bits != cells.front().bits)
        continue;
      if (!best || cell.fris.objective > best->fris.objective) best = &cell;
    }
    if (best) {
      std::string mask(best->fris.state.mask.active.size(), '0');
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (best->fris.state.mask.active[i]) mask[i] = '1';
      out.report["best_activation"] = {{"grid", best->grid.label()},
                                       {"active", best->mhat},
                                       {"bits", best->bits},
                                       {"seed", best->seed},
                                       {"mask", mask},
                                       {"rate", best->fris.objective}};
    }
  }
  out.cells = std::move(cells);
  return out;
}

// ---------------------------------------------------------------------------
// Case 2: weighted sum rate versus element count (pattern-reconfigurable)

struct Case2Cell {
  int elements = 0;
  int nt = 0;
  std::uint64_t seed = 0;
  std::string mode;  ///< pattern_fris | traditional_tr38901 | traditional_isotropic
  double wsr = 0.0;
  std::vector<TraceRow> trace;                     ///< outer trace (FRIS only)
  std::vector<std::vector<double>> wmmse_traces;   ///< every inner WMMSE trace
  long long milliseconds = 0;
};

struct Case2Output {
  std::vector<Case2Cell> cells;
  std::vector<ResultRow> rows;
  std::vector<NamedTrace> traces;
  std::vector<CellTiming> timings;
  nlohmann::ordered_json report;
};

/// Sweep (element count, BS antennas, seed) with the pattern optimizer, plus
/// the two fixed-pattern benchmarks at the largest antenna count.
inline Case2Output run_case2(const ExperimentConfig& config, int threads = 1) {
  int nt_base = *std::max_element(config.bs_antennas.begin(), config.bs_antennas.end());
  std::vector<Case2Cell> cells;
  for (int m : config.element_counts)
    for (int nt : config.bs_antennas)
      for (std::uint64_t seed : config.seeds)
        cells.push_back(Case2Cell{m, nt, seed, "pattern_fris"});
  for (int m : config.element_counts)
    for (const char* mode : {"traditional_tr38901", "traditional_isotropic"})
      for (std::uint64_t seed : config.seeds)
        cells.push_back(Case2Cell{m, nt_base, seed, mode});

  std::vector<double> weights = config.user_weights();
  detail::run_parallel(static_cast<int>(cells.size()), threads, [&](int i) {
    Case2Cell& cell = cells[i];
    detail::StopWatch watch;
    int side = static_cast<int>(std::lround(std::sqrt(double(cell.elements))));
    SurfaceGeometry geometry = grid_positions(side, side, config.spacing());
    MultiUserChannel mu = sample_multiuser(
        cell.seed,
        MultiUserSpec{config.l_paths, config.z_paths, config.users, cell.nt, config.wavelength});
    if (cell.mode == "pattern_fris") {
      MuScenario sc{geometry, mu,      config.noise_power,  weights,
                    config.power_budget, config.basis_size, config.energy_budget()};
      PatternOptResult r = optimize_patterns(sc, config.pattern, cell.seed);
      cell.wsr = r.wsr;
      cell.trace = std::move(r.trace);
      cell.wmmse_traces = std::move(r.wmmse_traces);
    } else {
      PatternSet pattern = cell.mode == "traditional_tr38901" ? PatternSet::tr38901()
                                                              : PatternSet::isotropic();
      MuBaselineResult r =
          traditional_mu_baseline(mu, geometry, pattern, weights, config.power_budget,
                                  config.noise_power, config.pattern.wmmse_iterations);
      cell.wsr = r.wsr;
      cell.wmmse_traces = std::move(r.wmmse_traces);
    }
    cell.milliseconds = watch.ms();
  });

  Case2Output out;
  for (const Case2Cell& cell : cells) {
    int side = static_cast<int>(std::lround(std::sqrt(double(cell.elements))));
    std::string label = std::to_string(side) + "x" + std::to_string(side);
    int param = cell.mode == "pattern_fris" ? config.basis_size : 0;
    out.rows.push_back(ResultRow{"case2", cell.seed, cell.mode, label, cell.elements, param,
                                 cell.nt, cell.wsr});
    std::string stem = "case2_" + label + "_nt" + std::to_string(cell.nt) + "_s" +
                       std::to_string(cell.seed) + "_" + cell.mode;
    if (!cell.trace.empty()) out.traces.push_back(NamedTrace{stem, cell.trace});
    out.timings.push_back(CellTiming{stem, cell.milliseconds});
  }

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  for (int m : config.element_counts) {
    for (int nt : config.bs_antennas) {
      std::vector<double> wsr;
      for (const Case2Cell& cell : cells)
        if (cell.elements == m && cell.nt == nt && cell.mode == "pattern_fris")
          wsr.push_back(cell.wsr);
      nlohmann::ordered_json s;
      s["elements"] = m;
      s["bs_antennas"] = nt;
      s["mode"] = "pattern_fris";
      s["median_wsr"] = median(wsr);
      summary.push_back(std::move(s));
    }
    for (const char* mode : {"traditional_tr38901", "traditional_isotropic"}) {
      std::vector<double> wsr;
      for (const Case2Cell& cell : cells)
        if (cell.elements == m && cell.mode == mode) wsr.push_back(cell.wsr);
      nlohmann::ordered_json s;
      s["elements"] = m;
      s["bs_antennas"] = nt_base;
      s["mode"] = mode;
      s["median_wsr"] = median(wsr);
      summary.push_back(std::move(s));
    }
  }
  out.report["experiment"] = "case2";
  out.report["summary"] = std::move(summary);
  out.cells = std::move(cells);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

/// results.csv schema (stable):
///   experiment,seed,mode,grid,active,param,nt,objective
/// `active` is the number of active elements; `param` is the phase bit depth
/// (case1) or the pattern basis size (case2, 0 for fixed-pattern baselines);
/// `nt` is the BS antenna count (0 in single-antenna experiments).
inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = "experiment,seed,mode,grid,active,param,nt,objective\n";
  for (const ResultRow& r : rows) {
    out += r.experiment + "," + std::to_string(r.seed) + "," + r.mode + "," + r.grid + "," +
           std::to_string(r.active) + "," + std::to_string(r.param) + "," + std::to_string(r.nt) +
           "," + detail::fmt_double(r.objective) + "\n";
  }
  return out;
}

inline std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::string out = "iteration,best_objective,mean_objective,entropy\n";
  for (const TraceRow& r : rows)
    out += std::to_string(r.iteration) + "," + detail::fmt_double(r.best_objective) + "," +
           detail::fmt_double(r.mean_objective) + "," + detail::fmt_double(r.entropy) + "\n";
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidState("cannot open output file: " + path.string());
  out << content;
}

/// Write the standard artifact set into `dir`: results.csv, timings.csv,
/// trace/*.csv and report.json.
inline void write_outputs(const std::filesystem::path& dir, const std::vector<ResultRow>& rows,
                          const std::vector<NamedTrace>& traces,
                          const std::vector<CellTiming>& timings,
                          const nlohmann::ordered_json& report) {
  std::filesystem::create_directories(dir / "trace");
  write_file(dir / "results.csv", results_csv(rows));
  std::string t = "cell,milliseconds\n";
  for (const CellTiming& c : timings)
    t += c.label + "," + std::to_string(c.milliseconds) + "\n";
  write_file(dir / "timings.csv", t);
  for (const NamedTrace& tr : traces)
    write_file(dir / "trace" / (tr.name + ".csv"), trace_csv(tr.rows));
  write_file(dir / "report.json", report.dump(2) + "\n");
}

}  // namespace fris
