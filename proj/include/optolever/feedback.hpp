#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "core.hpp"
#include "spectra.hpp"

// Cold damping with ideal viscous feedback: the measured angle (true motion
// plus imprecision) is differentiated and fed back as a torque -I gamma_fb d/dt.

namespace optolever {

struct FeedbackConfig {
  double gamma_fb = 0;  // rad/s
  double n_imp = 0;
  TorsionMode mode;

  [[nodiscard]] double gamma_eff() const { return mode.gamma_m + gamma_fb; }

  void validate() const {
    mode.validate();
    detail::require(gamma_fb >= 0 && std::isfinite(gamma_fb), "feedback rate must be >= 0");
    detail::require(n_imp >= 0 && std::isfinite(n_imp), "n_imp must be >= 0");
  }
};

struct ClosedLoopSpectra {
  SpectrumSeries physical;  // true angular motion
  SpectrumSeries in_loop;   // what the feedback sensor records
};

struct GainOptimum {
  double gamma_eff_opt = 0;  // rad/s
  double n_min = 0;
};

struct CoolingPoint {
  double gamma_eff = 0;
  double n_m = 0;
};

/// Imprecision quanta n_imp = S_imp / (2 S_zp) for a given mode.
inline double imprecision_quanta(double s_imp, const TorsionMode& mode,
                                 const PhysicalConstants& k = codata) {
  return s_imp / (2.0 * zero_point_psd_peak(mode, k));
}

/// Inverse of imprecision_quanta.
inline double imprecision_for_quanta(double n_imp, const TorsionMode& mode,
                                     const PhysicalConstants& k = codata) {
  return 2.0 * n_imp * zero_point_psd_peak(mode, k);
}

/// Closed-loop spectra. With chi_eff the susceptibility at gamma_eff:
///   physical: |chi_eff|^2 (S_th + S_BA + S_zp + (I gamma_fb omega)^2 S_imp)
///   in-loop:  |chi_eff|^2 (S_th + S_BA + S_zp) + S_imp |chi_eff / chi_m|^2
/// The in-loop imprecision is split into the bare floor S_imp and the
/// feedback-induced correlation S_imp (|chi_eff/chi_m|^2 - 1), which is
/// negative near resonance (noise squashing).
inline ClosedLoopSpectra closed_loop_spectrum(const FeedbackConfig& cfg, const ProbeBeam& beam,
                                              const Detector& det, std::span<const double> freqs,
                                              const PhysicalConstants& k = codata) {
  cfg.validate();
  if (freqs.empty()) throw ParameterError("frequency grid is empty");
  const TorsionMode& m = cfg.mode;
  const double s_imp = imprecision_psd(beam, det, k);
  const double s_ba = backaction_torque_psd(beam, k);
  const double s_th = thermal_torque_psd(m, k);
  const double s_zp = zero_point_torque_psd(m, k);
  const double g_eff = cfg.gamma_eff();

  ClosedLoopSpectra out;
  out.physical.resize(freqs.size());
  out.in_loop.resize(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (i > 0 && !(freqs[i] > freqs[i - 1]))
      throw ParameterError("frequency grid must be strictly increasing");
    const double w = freqs[i];
    const auto chi_eff = susceptibility(m, w, g_eff);
    const auto chi_m = susceptibility(m, w);
    const double c2 = std::norm(chi_eff);
    const double fb = m.inertia * cfg.gamma_fb * w;

    auto& p = out.physical;
    p.freqs[i] = w;
    p.imprecision[i] = c2 * fb * fb * s_imp;
    p.backaction[i] = c2 * s_ba;
    p.thermal[i] = c2 * s_th;
    p.zero_point[i] = c2 * s_zp;

    auto& y = out.in_loop;
    y.freqs[i] = w;
    y.imprecision[i] = s_imp;
    y.correlation[i] = s_imp * (std::norm(chi_eff / chi_m) - 1.0);
    y.backaction[i] = c2 * s_ba;
    y.thermal[i] = c2 * s_th;
    y.zero_point[i] = c2 * s_zp;
  }
  out.physical.sum_components();
  out.in_loop.sum_components();
  out.physical.check_invariants();
  out.in_loop.check_invariants();
  return out;
}

/// Occupation of a cold-damped mode in the weak-backaction limit.
inline double phonon_number(const FeedbackConfig& cfg, const PhysicalConstants& k = codata) {
  cfg.validate();
  const double n_th = thermal_occupation(cfg.mode, k);
  const double r = cfg.gamma_eff() / cfg.mode.gamma_m;
  return n_th / r + r * cfg.n_imp;
}

inline double phonon_number(const FeedbackConfig& cfg, double gamma_eff,
                            const PhysicalConstants& k = codata) {
  detail::require(gamma_eff >= cfg.mode.gamma_m, "gamma_eff cannot be below gamma_m");
  FeedbackConfig c = cfg;
  c.gamma_fb = gamma_eff - cfg.mode.gamma_m;
  return phonon_number(c, k);
}

/// True when quantum backaction heating is small against the thermal bath,
/// the regime in which phonon_number applies.
inline bool weak_backaction(const TorsionMode& mode, const ProbeBeam& beam,
                            const PhysicalConstants& k = codata) {
  return backaction_torque_psd(beam, k) < 0.1 * thermal_torque_psd(mode, k);
}

inline GainOptimum optimal_gain(const FeedbackConfig& cfg, const PhysicalConstants& k = codata) {
  cfg.validate();
  if (!(cfg.n_imp > 0)) throw ParameterError("n_imp = 0: optimal feedback gain is unbounded");
  const double n_th = thermal_occupation(cfg.mode, k);
  return {cfg.mode.gamma_m * std::sqrt(n_th / cfg.n_imp), 2.0 * std::sqrt(n_th * cfg.n_imp)};
}

inline std::vector<CoolingPoint> cooling_curve(const FeedbackConfig& cfg,
                                               std::span<const double> gamma_effs,
                                               const PhysicalConstants& k = codata) {
  std::vector<CoolingPoint> out;
  out.reserve(gamma_effs.size());
  for (double g : gamma_effs) out.push_back({g, phonon_number(cfg, g, k)});
  return out;
}

namespace detail {

/// Linear interpolation of series.total at angular frequency omega.
inline double total_at(const SpectrumSeries& s, double omega) {
  if (s.size() == 0 || omega < s.freqs.front() || omega > s.freqs.back())
    throw DataError("frequency outside the spectrum grid");
  std::size_t j = 1;
  while (j < s.size() && s.freqs[j] < omega) ++j;
  if (j >= s.size()) return s.total.back();
  const double t = (omega - s.freqs[j - 1]) / (s.freqs[j] - s.freqs[j - 1]);
  return s.total[j - 1] + t * (s.total[j] - s.total[j - 1]);
}

}  // namespace detail

/// Occupancy from an in-loop spectrum:
///   n_m = (gamma_eff/gamma_m) (S(omega_m) + S_imp) / (2 S_zp)
/// S(omega_m) is the in-loop PSD at resonance with any extraneous background
/// removed. Adding S_imp back restores the fed-back imprecision that the loop
/// squashes out of the recorded signal.
inline double estimate_occupancy_from_spectrum(const SpectrumSeries& in_loop,
                                               const TorsionMode& mode, double gamma_eff,
                                               double s_imp, double extraneous_floor = 0.0,
                                               const PhysicalConstants& k = codata) {
  mode.validate();
  detail::require(gamma_eff > 0, "gamma_eff must be positive");
  const double peak = detail::total_at(in_loop, mode.omega_m) - extraneous_floor;
  if (peak < 0) throw DataError("in-loop peak lies below the extraneous floor");
  return (gamma_eff / mode.gamma_m) * (peak + s_imp) / (2.0 * zero_point_psd_peak(mode, k));
}

/// Occupancy from the area of a physical-motion spectrum, n = I omega_m <theta^2> / hbar.
inline double occupancy_from_area(const SpectrumSeries& physical, const TorsionMode& mode,
                                  const PhysicalConstants& k = codata) {
  double var = 0;
  for (std::size_t i = 1; i < physical.size(); ++i) {
    const double df = (physical.freqs[i] - physical.freqs[i - 1]) / (2.0 * pi);
    var += 0.5 * (physical.total[i] + physical.total[i - 1]) * df;
  }
  return mode.inertia * mode.omega_m * var / k.hbar;
}

}  // namespace optolever
