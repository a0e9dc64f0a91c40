#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "fris/common.hpp"
#include "fris/direction.hpp"
#include "fris/rng.hpp"

namespace fris {

/// One hop path: complex gain share plus the direction it makes with the
/// surface (incidence for BS-side paths, departure for user-side paths).
struct HopPath {
  std::complex<double> gain;
  Direction direction;
};

struct ChannelSpec {
  int l_paths = 1;         ///< BS -> surface multipath count
  int z_paths = 4;         ///< surface -> user multipath count
  double wavelength = 0.1; ///< meters
  double path_loss = 1.0;  ///< optional common large-scale multiplier

  void validate() const {
    if (l_paths < 1) throw InvalidSpec("ChannelSpec: l_paths must be >= 1");
    if (z_paths < 1) throw InvalidSpec("ChannelSpec: z_paths must be >= 1");
    if (!(wavelength > 0.0)) throw InvalidSpec("ChannelSpec: wavelength must be positive");
    if (!(path_loss > 0.0)) throw InvalidSpec("ChannelSpec: path_loss must be positive");
  }
};

/// Cascaded single-user channel: L inbound hop paths and Z outbound hop
/// paths; the (l, z) cascade gain is the product of the two hop gains.
/// Immutable after construction.
class ChannelPair {
 public:
  ChannelPair(std::vector<HopPath> bs_paths, std::vector<HopPath> user_paths, double wavelength)
      : bs_paths_(std::move(bs_paths)), user_paths_(std::move(user_paths)), wavelength_(wavelength) {
    if (bs_paths_.empty() || user_paths_.empty())
      throw InvalidSpec("ChannelPair: need at least one path per hop");
    if (!(wavelength_ > 0.0)) throw InvalidSpec("ChannelPair: wavelength must be positive");
  }

  [[nodiscard]] int l_paths() const { return static_cast<int>(bs_paths_.size()); }
  [[nodiscard]] int z_paths() const { return static_cast<int>(user_paths_.size()); }
  [[nodiscard]] double wavelength() const { return wavelength_; }
  [[nodiscard]] const std::vector<HopPath>& bs_paths() const { return bs_paths_; }
  [[nodiscard]] const std::vector<HopPath>& user_paths() const { return user_paths_; }

  [[nodiscard]] std::complex<double> cascaded_gain(int l, int z) const {
    return bs_paths_.at(l).gain * user_paths_.at(z).gain;
  }

 private:
  std::vector<HopPath> bs_paths_;
  std::vector<HopPath> user_paths_;
  double wavelength_;
};

namespace detail {

inline Direction sample_front_direction(Rng& rng) {
  // Azimuth restricted to the surface's front half-space; polar kept away
  // from the poles where the azimuth becomes degenerate.
  double az = rng.uniform(-kPi / 2.0, kPi / 2.0);
  double polar = rng.uniform(kPi / 6.0, 5.0 * kPi / 6.0);
  return Direction::from_angles(az, polar);
}

}  // namespace detail

/// Draw a random multipath realization. Hop gains are i.i.d. circularly
/// symmetric complex Gaussian with unit mean power; directions are uniform
/// over the surface's front half-space. Deterministic in (seed, spec).
inline ChannelPair sample_multipath(std::uint64_t seed, const ChannelSpec& spec) {
  spec.validate();
  Rng rng = Rng::from_seed(seed).derive(0x6368616eULL);  // channel stream
  std::vector<HopPath> bs, user;
  bs.reserve(spec.l_paths);
  user.reserve(spec.z_paths);
  for (int l = 0; l < spec.l_paths; ++l) {
    std::complex<double> g = spec.path_loss * rng.complex_normal();
    bs.push_back(HopPath{g, detail::sample_front_direction(rng)});
  }
  for (int z = 0; z < spec.z_paths; ++z) {
    std::complex<double> g = rng.complex_normal();
    user.push_back(HopPath{g, detail::sample_front_direction(rng)});
  }
  return ChannelPair(std::move(bs), std::move(user), spec.wavelength);
}

/// Geometric phase of Eq-style cascaded propagation:
/// (2 pi / lambda) * (k_r - k_t)^T p, wrapped to (-pi, pi].
inline double steering_phase(const Eigen::Vector3d& position, const Direction& departure,
                             const Direction& incidence, double wavelength) {
  if (!(wavelength > 0.0)) throw InvalidSpec("steering_phase: wavelength must be positive");
  double raw = kTwoPi / wavelength * (departure.vec() - incidence.vec()).dot(position);
  return wrap_phase(raw);
}

// ---------------------------------------------------------------------------
// Multi-user extension: a BS array feeds the surface over shared inbound
// paths; each user has its own outbound path set.

struct MultiUserSpec {
  int l_paths = 2;
  int z_paths = 2;   ///< outbound paths per user
  int users = 2;
  int bs_antennas = 10;
  double wavelength = 0.1;

  void validate() const {
    if (l_paths < 1 || z_paths < 1) throw InvalidSpec("MultiUserSpec: path counts must be >= 1");
    if (users < 1) throw InvalidSpec("MultiUserSpec: users must be >= 1");
    if (bs_antennas < 1) throw InvalidSpec("MultiUserSpec: bs_antennas must be >= 1");
    if (!(wavelength > 0.0)) throw InvalidSpec("MultiUserSpec: wavelength must be positive");
  }
};

/// Inbound path as seen from the BS array: hop gain, incidence onto the
/// surface, and the BS-side departure angle that fixes the array steering.
struct BsArrayPath {
  std::complex<double> gain;
  Direction incidence;
  double bs_angle;  ///< departure angle off the BS uniform linear array
};

class MultiUserChannel {
 public:
  MultiUserChannel(std::vector<BsArrayPath> bs_paths, std::vector<std::vector<HopPath>> user_paths,
                   int bs_antennas, double wavelength)
      : bs_paths_(std::move(bs_paths)),
        user_paths_(std::move(user_paths)),
        bs_antennas_(bs_antennas),
        wavelength_(wavelength) {
    if (bs_paths_.empty() || user_paths_.empty())
      throw InvalidSpec("MultiUserChannel: empty path sets");
    for (const auto& paths : user_paths_)
      if (paths.empty()) throw InvalidSpec("MultiUserChannel: user with no outbound paths");
  }

  [[nodiscard]] int l_paths() const { return static_cast<int>(bs_paths_.size()); }
  [[nodiscard]] int users() const { return static_cast<int>(user_paths_.size()); }
  [[nodiscard]] int bs_antennas() const { return bs_antennas_; }
  [[nodiscard]] double wavelength() const { return wavelength_; }
  [[nodiscard]] const std::vector<BsArrayPath>& bs_paths() const { return bs_paths_; }
  [[nodiscard]] const std::vector<HopPath>& user_paths(int k) const { return user_paths_.at(k); }

  /// Half-wavelength ULA steering factor for antenna n on inbound path l.
  [[nodiscard]] std::complex<double> bs_steering(int antenna, int l) const {
    double phase = kPi * antenna * std::sin(bs_paths_.at(l).bs_angle);
    return std::polar(1.0, phase);
  }

 private:
  std::vector<BsArrayPath> bs_paths_;
  std::vector<std::vector<HopPath>> user_paths_;
  int bs_antennas_;
  double wavelength_;
};

inline MultiUserChannel sample_multiuser(std::uint64_t seed, const MultiUserSpec& spec) {
  spec.validate();
  Rng rng = Rng::from_seed(seed).derive(0x6d756368ULL);  // multi-user channel stream
  std::vector<BsArrayPath> bs;
  bs.reserve(spec.l_paths);
  for (int l = 0; l < spec.l_paths; ++l) {
    std::complex<double> g = rng.complex_normal();
    Direction inc = detail::sample_front_direction(rng);
    double angle = rng.uniform(-kPi / 2.0, kPi / 2.0);
    bs.push_back(BsArrayPath{g, inc, angle});
  }
  std::vector<std::vector<HopPath>> users(spec.users);
  for (auto& paths : users) {
    paths.reserve(spec.z_paths);
    for (int z = 0; z < spec.z_paths; ++z)
      paths.push_back(HopPath{rng.complex_normal(), detail::sample_front_direction(rng)});
  }
  return MultiUserChannel(std::move(bs), std::move(users), spec.bs_antennas, spec.wavelength);
}

// ---------------------------------------------------------------------------
// JSON serialization (angles in radians, gains as [re, im])

inline nlohmann::ordered_json to_json(const HopPath& p) {
  return {{"gain", {p.gain.real(), p.gain.imag()}},
          {"azimuth", p.direction.azimuth()},
          {"polar", p.direction.polar()}};
}

inline HopPath hop_path_from_json(const nlohmann::json& j) {
  std::complex<double> g(j.at("gain").at(0).get<double>(), j.at("gain").at(1).get<double>());
  return HopPath{g, Direction::from_angles(j.at("azimuth").get<double>(), j.at("polar").get<double>())};
}

inline nlohmann::ordered_json to_json(const ChannelPair& ch) {
  nlohmann::ordered_json j;
  j["wavelength"] = ch.wavelength();
  j["bs_paths"] = nlohmann::ordered_json::array();
  for (const auto& p : ch.bs_paths()) j["bs_paths"].push_back(to_json(p));
  j["user_paths"] = nlohmann::ordered_json::array();
  for (const auto& p : ch.user_paths()) j["user_paths"].push_back(to_json(p));
  return j;
}

inline ChannelPair channel_pair_from_json(const nlohmann::json& j) {
  std::vector<HopPath> bs, user;
  for (const auto& p : j.at("bs_paths")) bs.push_back(hop_path_from_json(p));
  for (const auto& p : j.at("user_paths")) user.push_back(hop_path_from_json(p));
  return ChannelPair(std::move(bs), std::move(user), j.at("wavelength").get<double>());
}

}  // namespace fris
