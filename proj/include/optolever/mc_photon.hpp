#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "core.hpp"
#include "parallel.hpp"

// Semiclassical photon-counting model of radiation-pressure torque on a
// ribbon rotating about the y axis. Each reflected photon transfers momentum
// 2 hbar k at lateral position x, i.e. an angular impulse 2 hbar k x.

namespace optolever {

struct PhotonStreamConfig {
  ProbeBeam beam;         // wavelength, power and spot size w(z)
  double dt = 0;          // s, bin width
  double duration = 0;    // s
  std::uint64_t seed = 1;
  double x_off = 0;       // m, beam centre relative to the torsion axis

  [[nodiscard]] double photon_flux(const PhysicalConstants& k = codata) const {
    return beam.power * beam.wavelength / (2.0 * pi * k.hbar * k.c);
  }
  [[nodiscard]] std::size_t bins() const {
    return static_cast<std::size_t>(std::floor(duration / dt + 0.5));
  }

  void validate(const PhysicalConstants& k = codata) const {
    beam.validate();
    detail::require(dt > 0 && duration > 0, "bin width and duration must be positive");
    detail::require(photon_flux(k) * dt >= 100.0,
                    "fewer than 100 photons per bin; semiclassical model not valid");
    detail::require(bins() >= 1024, "need at least 1024 bins");
    detail::require(std::isfinite(x_off), "beam offset must be finite");
  }
};

struct TorqueSeries {
  std::vector<double> torque;  // N m per bin
  double dt = 0;
  std::uint64_t n_photons = 0;
};

struct BackactionEstimate {
  double S_tau = 0;        // N^2 m^2/Hz, single-sided
  double S_tau_stderr = 0; // standard error of S_tau
  std::uint64_t n_photons = 0;
  double mean_torque = 0;  // N m
  double mean_stderr = 0;  // N m
};

inline TorqueSeries simulate_torque_series(const PhotonStreamConfig& cfg,
                                           const PhysicalConstants& k = codata) {
  cfg.validate(k);
  const std::size_t n = cfg.bins();
  const double per_bin = cfg.photon_flux(k) * cfg.dt;
  const double impulse = 2.0 * k.hbar * cfg.beam.wavenumber();
  const double sigma_x = cfg.beam.spot_size() / 2.0;  // intensity marginal std

  std::mt19937_64 rng(cfg.seed);
  std::poisson_distribution<std::uint64_t> count(per_bin);
  std::normal_distribution<double> gauss(0.0, 1.0);

  TorqueSeries out;
  out.dt = cfg.dt;
  out.torque.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t m = count(rng);
    // Sum of m independent photon positions, drawn in one go.
    const auto md = static_cast<double>(m);
    const double lever_sum = md * cfg.x_off + sigma_x * std::sqrt(md) * gauss(rng);
    out.torque[i] = impulse * lever_sum / cfg.dt;
    out.n_photons += m;
  }
  return out;
}

/// White-noise PSD from the bin variance, S = 2 Var(tau) dt.
inline BackactionEstimate estimate_backaction_psd(const TorqueSeries& series) {
  const auto n = static_cast<double>(series.torque.size());
  if (series.torque.size() < 2) throw DataError("torque series too short");
  double mean = 0;
  for (double t : series.torque) mean += t;
  mean /= n;
  double m2 = 0, m4 = 0;
  for (double t : series.torque) {
    const double d = (t - mean) * (t - mean);
    m2 += d;
    m4 += d * d;
  }
  const double var = m2 / (n - 1.0);
  m4 /= n;
  const double var_of_var = std::max(0.0, (m4 - var * var)) / n;

  BackactionEstimate e;
  e.S_tau = 2.0 * var * series.dt;
  e.S_tau_stderr = 2.0 * series.dt * std::sqrt(var_of_var);
  e.n_photons = series.n_photons;
  e.mean_torque = mean;
  e.mean_stderr = std::sqrt(var / n);
  return e;
}

inline BackactionEstimate estimate_backaction_psd(const PhotonStreamConfig& cfg,
                                                  const PhysicalConstants& k = codata) {
  return estimate_backaction_psd(simulate_torque_series(cfg, k));
}

/// Averages independent replicas whose seeds are split from cfg.seed.
inline BackactionEstimate estimate_backaction_psd(const PhotonStreamConfig& cfg,
                                                  unsigned replicas, unsigned threads,
                                                  const PhysicalConstants& k = codata) {
  detail::require(replicas >= 1, "need at least one replica");
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                    static_cast<std::uint32_t>(cfg.seed >> 32)};
  std::vector<std::uint32_t> seeds(2 * replicas);
  seq.generate(seeds.begin(), seeds.end());
  auto parts = detail::parallel_map<BackactionEstimate>(replicas, threads, [&](std::size_t r) {
    PhotonStreamConfig c = cfg;
    c.seed = (std::uint64_t(seeds[2 * r]) << 32) | seeds[2 * r + 1];
    return estimate_backaction_psd(c, k);
  });
  BackactionEstimate out;
  double se2 = 0, me2 = 0;
  for (const auto& p : parts) {
    out.S_tau += p.S_tau / replicas;
    out.mean_torque += p.mean_torque / replicas;
    out.n_photons += p.n_photons;
    se2 += p.S_tau_stderr * p.S_tau_stderr;
    me2 += p.mean_stderr * p.mean_stderr;
  }
  out.S_tau_stderr = std::sqrt(se2) / replicas;
  out.mean_stderr = std::sqrt(me2) / replicas;
  return out;
}

}  // namespace optolever
