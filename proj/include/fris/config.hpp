#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fris/common.hpp"
#include "fris/optimize.hpp"
#include "fris/pattern_opt.hpp"
#include "fris/spherical_harmonics.hpp"

namespace fris {

struct GridSize {
  int rows = 1;
  int cols = 1;
  [[nodiscard]] int elements() const { return rows * cols; }
  [[nodiscard]] std::string label() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

/// Full experiment description, loadable from the sectioned key/value
/// format or from JSON. Defaults give the desk-scale setups the runners
/// were tuned on.
struct ExperimentConfig {
  std::string kind = "demo";  // demo | case1 | case2
  std::vector<std::uint64_t> seeds = {1};

  // [channel]
  int l_paths = 1;
  int z_paths = 4;
  double wavelength = 0.1;
  int users = 2;
  std::vector<int> bs_antennas = {5, 10};

  // [surface]
  std::vector<GridSize> grids = {{6, 6}};
  std::vector<int> active_counts = {4};
  std::vector<int> bits = {1};
  int basis_size = kMaxShCount;
  double energy_budget_iso = std::pow(10.0, 0.8);  // in isotropic-energy units
  double spacing_wavelengths = 0.5;
  std::vector<int> element_counts = {25, 100};  // case2 surface sizes

  // [metrics]
  double noise_power = 1e-2;
  double power_budget = 1.0;
  std::vector<double> weights;  // empty = uniform 1/K

  // [ceo] / [pattern]
  CeoParams ceo;
  PatternOptParams pattern;

  [[nodiscard]] double spacing() const { return spacing_wavelengths * wavelength; }
  [[nodiscard]] double energy_budget() const { return energy_budget_iso * sh_isotropic_energy(); }
  [[nodiscard]] std::vector<double> user_weights() const {
    if (!weights.empty()) return weights;
    return std::vector<double>(users, 1.0 / users);
  }

  void validate() const;
};

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "': " + why);
  };
  if (kind != "demo" && kind != "case1" && kind != "case2")
    fail("experiment.kind", "must be demo, case1 or case2");
  if (seeds.empty()) fail("experiment.seeds", "must be non-empty");
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) fail("experiment.seeds", "seeds must be distinct");
  if (l_paths < 1) fail("channel.l_paths", "must be >= 1");
  if (z_paths < 1) fail("channel.z_paths", "must be >= 1");
  if (!(wavelength > 0.0)) fail("channel.wavelength", "must be positive");
  if (users < 1) fail("channel.users", "must be >= 1");
  if (bs_antennas.empty()) fail("channel.bs_antennas", "must be non-empty");
  for (int nt : bs_antennas)
    if (nt < 1) fail("channel.bs_antennas", "entries must be >= 1");
  if (grids.empty()) fail("surface.grids", "must be non-empty");
  for (const auto& g : grids)
    if (g.rows < 1 || g.cols < 1) fail("surface.grids", "grid dimensions must be >= 1");
  if (active_counts.empty()) fail("surface.active_counts", "must be non-empty");
  for (int mhat : active_counts) {
    if (mhat < 1) fail("surface.active_counts", "entries must be >= 1");
    for (const auto& g : grids)
      if (mhat > g.elements())
        fail("surface.active_counts",
             "active count " + std::to_string(mhat) + " exceeds grid " + g.label());
  }
  if (bits.empty()) fail("surface.bits", "must be non-empty");
  for (int b : bits)
    if (b < 1) fail("surface.bits", "entries must be >= 1");
  if (basis_size < 1 || basis_size > kMaxShCount)
    fail("surface.basis_size", "must be in [1, " + std::to_string(kMaxShCount) + "]");
  if (!(energy_budget_iso > 0.0)) fail("surface.energy_budget", "must be positive");
  if (!(spacing_wavelengths > 0.0)) fail("surface.spacing_wavelengths", "must be positive");
  if (element_counts.empty()) fail("surface.element_counts", "must be non-empty");
  for (int m : element_counts) {
    if (m < 1) fail("surface.element_counts", "entries must be >= 1");
    int side = static_cast<int>(std::lround(std::sqrt(double(m))));
    if (side * side != m)
      fail("surface.element_counts", "entries must be perfect squares (planar grids)");
  }
  if (!(noise_power > 0.0)) fail("metrics.noise_power", "must be positive");
  if (!(power_budget > 0.0)) fail("metrics.power_budget", "must be positive");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != users)
      fail("metrics.weights", "must have one entry per user");
    for (double w : weights)
      if (!(w > 0.0)) fail("metrics.weights", "entries must be positive");
  }
  try {
    ceo.validate();
    pattern.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("config optimizer parameters: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sectioned key/value parser

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct KvFile {
  std::map<std::string, std::string> values;  // "section.key" -> raw value
  std::string origin;

  [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ConfigError(origin + ": field '" + key + "' is not a number: " + *v);
    }
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      long long d = std::stoll(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return d;
    } catch (...) {
      throw ConfigError(origin + ": field '" + key + "' is not an integer: " + *v);
    }
  }
};

inline KvFile parse_kv(std::istream& in, const std::string& origin) {
  static const std::vector<std::string> known_sections = {"experiment", "channel", "surface",
                                                          "metrics",    "ceo",     "pattern"};
  KvFile kv;
  kv.origin = origin;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& s : known_sections) known = known || s == section;
      if (!known)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key outside any section");
    std::string key = trim(line.substr(0, eq));
    kv.values[section + "." + key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline GridSize parse_grid(const std::string& s, const std::string& origin) {
  std::size_t x = s.find('x');
  if (x == std::string::npos)
    throw ConfigError(origin + ": grid '" + s + "' must look like ROWSxCOLS");
  try {
    return GridSize{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (...) {
    throw ConfigError(origin + ": grid '" + s + "' must look like ROWSxCOLS");
  }
}

inline ExperimentConfig config_from_kv(const KvFile& kv) {
  ExperimentConfig c;
  static const char* known[] = {
      "experiment.kind",        "experiment.seeds",
      "channel.l_paths",        "channel.z_paths",
      "channel.wavelength",     "channel.users",
      "channel.bs_antennas",    "surface.grids",
      "surface.active_counts",  "surface.bits",
      "surface.basis_size",     "surface.energy_budget",
      "surface.spacing_wavelengths",               "surface.element_counts",
      "metrics.noise_power",    "metrics.power_budget",
      "metrics.weights",        "ceo.population",
      "ceo.elite_fraction",     "ceo.smoothing",
      "ceo.max_iterations",     "pattern.step_size",
      "pattern.max_iterations", "pattern.backtracking",
      "pattern.wmmse_iterations"};
  for (const auto& [key, value] : kv.values) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(kv.origin + ": unknown field '" + key + "'");
    (void)value;
  }
  if (auto v = kv.get("experiment.kind")) c.kind = *v;
  if (auto v = kv.get("experiment.seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(*v)) {
      try {
        c.seeds.push_back(std::stoull(s));
      } catch (...) {
        throw ConfigError(kv.origin + ": seed '" + s + "' is not an integer");
      }
    }
  }
  c.l_paths = static_cast<int>(kv.get_int("channel.l_paths", c.l_paths));
  c.z_paths = static_cast<int>(kv.get_int("channel.z_paths", c.z_paths));
  c.wavelength = kv.get_double("channel.wavelength", c.wavelength);
  c.users = static_cast<int>(kv.get_int("channel.users", c.users));
  if (auto v = kv.get("channel.bs_antennas")) {
    c.bs_antennas.clear();
    for (const auto& s : split_list(*v)) c.bs_antennas.push_back(std::stoi(s));
  }
  if (auto v = kv.get("surface.grids")) {
    c.grids.clear();
    for (const auto& s : split_list(*v)) c.grids.push_back(parse_grid(s, kv.origin));
  }
  if (auto v = kv.get("surface.active_counts")) {
    c.active_counts.clear();
    for (const auto& s : split_list(*v)) c.active_counts.push_back(std::stoi(s));
  }
  if (auto v = kv.get("surface.bits")) {
    c.bits.clear();
    for (const auto& s : split_list(*v)) c.bits.push_back(std::stoi(s));
  }
  c.basis_size = static_cast<int>(kv.get_int("surface.basis_size", c.basis_size));
  c.energy_budget_iso = kv.get_double("surface.energy_budget", c.energy_budget_iso);
  c.spacing_wavelengths = kv.get_double("surface.spacing_wavelengths", c.spacing_wavelengths);
  if (auto v = kv.get("surface.element_counts")) {
    c.element_counts.clear();
    for (const auto& s : split_list(*v)) c.element_counts.push_back(std::stoi(s));
  }
  c.noise_power = kv.get_double("metrics.noise_power", c.noise_power);
  c.power_budget = kv.get_double("metrics.power_budget", c.power_budget);
  if (auto v = kv.get("metrics.weights")) {
    c.weights.clear();
    for (const auto& s : split_list(*v)) c.weights.push_back(std::stod(s));
  }
  c.ceo.population = static_cast<int>(kv.get_int("ceo.population", c.ceo.population));
  c.ceo.elite_fraction = kv.get_double("ceo.elite_fraction", c.ceo.elite_fraction);
  c.ceo.smoothing = kv.get_double("ceo.smoothing", c.ceo.smoothing);
  c.ceo.max_iterations = static_cast<int>(kv.get_int("ceo.max_iterations", c.ceo.max_iterations));
  c.pattern.step_size = kv.get_double("pattern.step_size", c.pattern.step_size);
  c.pattern.max_iterations =
      static_cast<int>(kv.get_int("pattern.max_iterations", c.pattern.max_iterations));
  c.pattern.backtracking = kv.get_double("pattern.backtracking", c.pattern.backtracking);
  c.pattern.wmmse_iterations =
      static_cast<int>(kv.get_int("pattern.wmmse_iterations", c.pattern.wmmse_iterations));
  c.validate();
  return c;
}

}  // namespace detail

inline ExperimentConfig load_config_stream(std::istream& in, const std::string& origin) {
  return detail::config_from_kv(detail::parse_kv(in, origin));
}

/// Load a config from disk. `.json` files use the same section/field names
/// as nested JSON objects; anything else is parsed as the sectioned
/// key/value format.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    // flatten the two-level JSON into the key/value representation
    detail::KvFile kv;
    kv.origin = path;
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object()) throw ConfigError(path + ": section '" + section + "' must be an object");
      for (const auto& [key, value] : body.items()) {
        std::string raw;
        if (value.is_array()) {
          for (const auto& item : value) {
            if (!raw.empty()) raw += ",";
            raw += item.is_string() ? item.get<std::string>() : item.dump();
          }
        } else if (value.is_string()) {
          raw = value.get<std::string>();
        } else {
          raw = value.dump();
        }
        kv.values[section + "." + key] = raw;
      }
    }
    return detail::config_from_kv(kv);
  }
  return load_config_stream(in, path);
}

/// Serialize back to the sectioned key/value format; load(save(c)) == c.
inline std::string save_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "[experiment]\n";
  out << "kind = " << c.kind << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << "\n\n[channel]\n";
  out << "l_paths = " << c.l_paths << "\nz_paths = " << c.z_paths << "\n";
  out << "wavelength = " << num(c.wavelength) << "\nusers = " << c.users << "\n";
  out << "bs_antennas = ";
  for (std::size_t i = 0; i < c.bs_antennas.size(); ++i) out << (i ? "," : "") << c.bs_antennas[i];
  out << "\n\n[surface]\ngrids = ";
  for (std::size_t i = 0; i < c.grids.size(); ++i) out << (i ? "," : "") << c.grids[i].label();
  out << "\nactive_counts = ";
  for (std::size_t i = 0; i < c.active_counts.size(); ++i)
    out << (i ? "," : "") << c.active_counts[i];
  out << "\nbits = ";
  for (std::size_t i = 0; i < c.bits.size(); ++i) out << (i ? "," : "") << c.bits[i];
  out << "\nbasis_size = " << c.basis_size << "\n";
  out << "energy_budget = " << num(c.energy_budget_iso) << "\n";
  out << "spacing_wavelengths = " << num(c.spacing_wavelengths) << "\n";
  out << "element_counts = ";
  for (std::size_t i = 0; i < c.element_counts.size(); ++i)
    out << (i ? "," : "") << c.element_counts[i];
  out << "\n\n[metrics]\n";
  out << "noise_power = " << num(c.noise_power) << "\npower_budget = " << num(c.power_budget) << "\n";
  if (!c.weights.empty()) {
    out << "weights = ";
    for (std::size_t i = 0; i < c.weights.size(); ++i) out << (i ? "," : "") << num(c.weights[i]);
    out << "\n";
  }
  out << "\n[ceo]\n";
  out << "population = " << c.ceo.population << "\nelite_fraction = " << num(c.ceo.elite_fraction)
      << "\nsmoothing = " << num(c.ceo.smoothing) << "\nmax_iterations = " << c.ceo.max_iterations
      << "\n";
  out << "\n[pattern]\n";
  out << "step_size = " << num(c.pattern.step_size)
      << "\nmax_iterations = " << c.pattern.max_iterations
      << "\nbacktracking = " << num(c.pattern.backtracking)
      << "\nwmmse_iterations = " << c.pattern.wmmse_iterations << "\n";
  return out.str();
}

}  // namespace fris
