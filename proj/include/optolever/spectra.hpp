#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"

namespace optolever {

/// Angle PSD on a frequency grid with its additive breakdown. Frequencies are
/// angular (rad/s); PSDs are single-sided, rad^2/Hz.
struct SpectrumSeries {
  std::vector<double> freqs;
  std::vector<double> total;
  std::vector<double> imprecision;
  std::vector<double> backaction;
  std::vector<double> thermal;
  std::vector<double> zero_point;
  std::vector<double> correlation;

  [[nodiscard]] std::size_t size() const { return freqs.size(); }

  void resize(std::size_t n) {
    for (auto* v : {&freqs, &total, &imprecision, &backaction, &thermal, &zero_point, &correlation})
      v->assign(n, 0.0);
  }

  /// Recomputes total as the sum of components.
  void sum_components() {
    for (std::size_t i = 0; i < size(); ++i)
      total[i] = imprecision[i] + backaction[i] + thermal[i] + zero_point[i] + correlation[i];
  }

  /// Throws NumericalError if any series invariant is violated.
  void check_invariants() const {
    const std::size_t n = size();
    for (const auto* v : {&total, &imprecision, &backaction, &thermal, &zero_point, &correlation})
      if (v->size() != n) throw NumericalError("spectrum component length mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && !(freqs[i] > freqs[i - 1]))
        throw NumericalError("spectrum frequencies not strictly increasing");
      const double parts[] = {imprecision[i], backaction[i], thermal[i], zero_point[i],
                              correlation[i]};
      double sum = 0, scale = 0;
      for (double p : parts) {
        if (!std::isfinite(p)) throw NumericalError("non-finite spectrum component");
        sum += p;
        scale += std::abs(p);
      }
      for (int j = 0; j < 4; ++j)
        if (parts[j] < 0) throw NumericalError("negative noise component");
      if (std::abs(total[i] - sum) > 1e-12 * std::max(scale, std::abs(total[i])))
        throw NumericalError("spectrum total differs from sum of components");
    }
  }
};

struct NoiseBudget {
  double S_imp = 0;       // rad^2/Hz
  double S_tau_BA = 0;    // N^2 m^2/Hz
  double S_tau_th = 0;    // N^2 m^2/Hz
  double S_zp_peak = 0;   // rad^2/Hz
  double n_imp = 0;
  double n_th = 0;
  double product = 0;     // (J s)^2
  double eta_total = 0;

  /// Imprecision below the SQL imprecision (n_imp = 1/4), in dB.
  [[nodiscard]] double db_below_sql() const { return 10.0 * std::log10(0.25 / n_imp); }
};

/// Classical imprecision-backaction correlation term C Re[chi] plus the
/// intensity-noise torque that accompanies it.
struct Correlation {
  double S_tau_IM = 0;  // N^2 m^2/Hz
  double C = 0;         // rad N m/Hz
};

/// chi(omega) = 1 / (I (omega^2 - omega_m^2 - i gamma_m omega)).
inline std::complex<double> susceptibility(const TorsionMode& mode, double omega) {
  detail::require(omega >= 0, "frequency must be non-negative");
  const std::complex<double> denom(omega * omega - mode.omega_m * mode.omega_m,
                                   -mode.gamma_m * omega);
  return 1.0 / (mode.inertia * denom);
}

/// Same form with an arbitrary damping rate, used for cold-damped modes.
inline std::complex<double> susceptibility(const TorsionMode& mode, double omega,
                                           double gamma) {
  TorsionMode m = mode;
  m.gamma_m = gamma;
  return susceptibility(m, omega);
}

/// Shot-noise imprecision of a split-detector optical lever focused on the
/// ribbon, plus the detector's extraneous floor.
inline double imprecision_psd(const ProbeBeam& beam, const Detector& det,
                              const PhysicalConstants& k = codata) {
  beam.validate();
  det.validate();
  const double w0 = beam.waist;
  return (1.0 / (w0 * w0)) * (k.hbar * k.c * beam.wavelength / (4.0 * pi * beam.power)) *
             (pi / (2.0 * det.eta_d)) +
         det.extraneous_floor;
}

/// Radiation-pressure shot-noise torque for the spot size on the ribbon.
inline double backaction_torque_psd(const ProbeBeam& beam, const PhysicalConstants& k = codata) {
  detail::require(beam.power >= 0, "power must be non-negative");
  const double w = beam.spot_size();
  return w * w * 4.0 * pi * k.hbar * beam.power / (k.c * beam.wavelength);
}

inline NoiseBudget budget(const ProbeBeam& beam, const Detector& det, const TorsionMode& mode,
                          const PhysicalConstants& k = codata) {
  mode.validate();
  NoiseBudget b;
  b.S_imp = imprecision_psd(beam, det, k);
  b.S_tau_BA = backaction_torque_psd(beam, k);
  b.S_tau_th = thermal_torque_psd(mode, k);
  b.S_zp_peak = zero_point_psd_peak(mode, k);
  b.n_imp = b.S_imp / (2.0 * b.S_zp_peak);
  b.n_th = thermal_occupation(mode, k);
  b.product = b.S_imp * b.S_tau_BA;
  b.eta_total = det.total_efficiency();
  return b;
}

/// Zero-point contribution with the thermal Lorentzian lineshape, peaked at
/// zero_point_psd_peak on resonance.
inline double zero_point_psd(const TorsionMode& mode, double omega,
                             const PhysicalConstants& k = codata) {
  return std::norm(susceptibility(mode, omega)) * zero_point_torque_psd(mode, k);
}

inline SpectrumSeries total_spectrum(const ProbeBeam& beam, const Detector& det,
                                     const TorsionMode& mode, std::span<const double> freqs,
                                     std::optional<Correlation> correlation = std::nullopt,
                                     const PhysicalConstants& k = codata) {
  if (freqs.empty()) throw ParameterError("frequency grid is empty");
  mode.validate();
  const double s_imp = imprecision_psd(beam, det, k);
  const double s_ba = backaction_torque_psd(beam, k);
  const double s_th = thermal_torque_psd(mode, k);
  const double s_zp = zero_point_torque_psd(mode, k);
  const double s_im = correlation ? correlation->S_tau_IM : 0.0;
  const double c = correlation ? correlation->C : 0.0;

  SpectrumSeries s;
  s.resize(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (i > 0 && !(freqs[i] > freqs[i - 1]))
      throw ParameterError("frequency grid must be strictly increasing");
    const auto chi = susceptibility(mode, freqs[i]);
    const double chi2 = std::norm(chi);
    s.freqs[i] = freqs[i];
    s.imprecision[i] = s_imp;
    // Intensity-noise torque is a backaction channel.
    s.backaction[i] = chi2 * (s_ba + s_im);
    s.thermal[i] = chi2 * s_th;
    s.zero_point[i] = chi2 * s_zp;
    s.correlation[i] = c * chi.real();
  }
  s.sum_components();
  s.check_invariants();
  return s;
}

struct SqlOptimum {
  double P_opt = 0;      // W
  double added_min = 0;  // rad^2/Hz
};

/// Power minimising imprecision plus on-resonance backaction. Both terms are
/// monomials in P (a/P and b P), so the optimum is sqrt(a/b) with value 2 sqrt(ab).
inline SqlOptimum sql_optimal_power(const ProbeBeam& beam_template, const Detector& det,
                                    const TorsionMode& mode, const PhysicalConstants& k = codata) {
  detail::require(beam_template.focus_offset == 0.0, "SQL optimum requires focus on the ribbon");
  detail::require(det.extraneous_floor == 0.0, "SQL optimum requires zero extraneous imprecision");
  ProbeBeam unit = beam_template;
  unit.power = 1.0;
  const double a = imprecision_psd(unit, det, k);
  const double b = std::norm(susceptibility(mode, mode.omega_m)) * backaction_torque_psd(unit, k);
  return {std::sqrt(a / b), 2.0 * std::sqrt(a * b)};
}

/// Imprecision plus backaction angle noise at resonance for a given power.
inline double added_noise_on_resonance(const ProbeBeam& beam, const Detector& det,
                                       const TorsionMode& mode,
                                       const PhysicalConstants& k = codata) {
  return imprecision_psd(beam, det, k) +
         std::norm(susceptibility(mode, mode.omega_m)) * backaction_torque_psd(beam, k);
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * double(i) / double(n - 1);
  return v;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  auto v = linspace(std::log10(lo), std::log10(hi), n);
  for (double& x : v) x = std::pow(10.0, x);
  return v;
}

}  // namespace optolever
