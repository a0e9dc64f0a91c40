#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "fris/metrics.hpp"

namespace fris {

struct WmmseResult {
  PrecoderSet precoders;
  std::vector<double> wsr_trace;  ///< weighted sum rate after each iteration
};

/// Weighted-sum-rate maximizing precoders via the WMMSE equivalence:
/// alternating receive-scalar, MSE-weight, and precoder updates, with the
/// transmit power constraint enforced through bisection on the dual
/// variable. The WSR trace is non-decreasing up to numerical slack.
inline WmmseResult wmmse_precoders(const std::vector<Eigen::VectorXcd>& channels,
                                   const std::vector<double>& weights, double power_budget,
                                   double noise, int iterations) {
  const int k_users = static_cast<int>(channels.size());
  if (k_users < 1) throw InvalidSpec("wmmse_precoders: need at least one user");
  if (!(power_budget > 0.0)) throw InvalidSpec("wmmse_precoders: power budget must be positive");
  if (!(noise > 0.0)) throw InvalidSpec("wmmse_precoders: noise must be positive");
  const int nt = static_cast<int>(channels[0].size());
  for (const auto& h : channels) {
    if (h.size() != nt) throw InvalidState("wmmse_precoders: channel length mismatch");
    if (!h.allFinite()) throw InvalidState("wmmse_precoders: non-finite channel entries");
  }

  WmmseResult res;
  res.precoders.power_budget = power_budget;
  res.precoders.w.assign(k_users, Eigen::VectorXcd::Zero(nt));

  bool any_nonzero = false;
  for (int k = 0; k < k_users; ++k) {
    double n = channels[k].norm();
    if (n > 0.0) {
      res.precoders.w[k] = std::sqrt(power_budget / k_users) * channels[k] / n;
      any_nonzero = true;
    }
  }
  if (!any_nonzero) return res;  // zero channels: zero precoders, WSR 0

  auto& w = res.precoders.w;
  for (int it = 0; it < iterations; ++it) {
    // receive scalars and MSE weights
    std::vector<std::complex<double>> u(k_users);
    std::vector<double> v(k_users);
    for (int k = 0; k < k_users; ++k) {
      double total = noise;
      for (int j = 0; j < k_users; ++j) total += std::norm(channels[k].dot(w[j]));
      std::complex<double> d = channels[k].dot(w[k]);
      u[k] = d / total;
      double e = 1.0 - std::real(std::conj(u[k]) * d);
      e = std::max(e, 1e-14);
      v[k] = weights[k] / e;
    }

    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(nt, nt);
    for (int k = 0; k < k_users; ++k)
      a += v[k] * std::norm(u[k]) * channels[k] * channels[k].adjoint();

    auto solve_w = [&](double mu) {
      Eigen::MatrixXcd lhs = a + mu * Eigen::MatrixXcd::Identity(nt, nt);
      Eigen::LDLT<Eigen::MatrixXcd> ldlt(lhs);
      std::vector<Eigen::VectorXcd> out(k_users);
      for (int k = 0; k < k_users; ++k) out[k] = ldlt.solve(v[k] * u[k] * channels[k]);
      return out;
    };
    auto total_power = [](const std::vector<Eigen::VectorXcd>& ws) {
      double p = 0.0;
      for (const auto& wk : ws) {
        if (!wk.allFinite()) return std::numeric_limits<double>::infinity();
        p += wk.squaredNorm();
      }
      return p;
    };

    std::vector<Eigen::VectorXcd> cand = solve_w(0.0);
    if (!(total_power(cand) <= power_budget)) {
      double lo = 0.0, hi = 1.0;
      while (total_power(solve_w(hi)) > power_budget) hi *= 2.0;
      for (int b = 0; b < 100; ++b) {
        double mid = 0.5 * (lo + hi);
        if (total_power(solve_w(mid)) > power_budget)
          lo = mid;
        else
          hi = mid;
      }
      cand = solve_w(hi);
    }
    std::vector<Eigen::VectorXcd> prev = w;
    w = std::move(cand);
    double wsr = weighted_sum_rate(channels, res.precoders, weights, noise);
    // converged: at the numerical plateau the alternating updates can jitter
    // below the incumbent, so keep the better precoders and stop
    if (!res.wsr_trace.empty() && wsr < res.wsr_trace.back()) {
      w = std::move(prev);
      break;
    }
    res.wsr_trace.push_back(wsr);
  }
  return res;
}

}  // namespace fris
