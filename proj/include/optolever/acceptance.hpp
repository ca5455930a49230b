#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "calib.hpp"
#include "core.hpp"
#include "diffraction.hpp"
#include "feedback.hpp"
#include "mc_photon.hpp"
#include "spectra.hpp"
#include "timesim.hpp"

// End-to-end checks of the library against reference device numbers. Each
// criterion reports its clauses with measured values and fixed tolerances.

namespace optolever::acceptance {

struct Clause {
  std::string name;
  double measured = 0;
  std::string target;
  bool passed = false;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Clause> clauses;
  std::string error;  // set when the check itself threw

  [[nodiscard]] bool passed() const {
    return error.empty() && !clauses.empty() &&
           std::all_of(clauses.begin(), clauses.end(), [](const Clause& c) { return c.passed; });
  }
};

struct Options {
  PhysicalConstants constants = codata;
  unsigned threads = 1;
  std::uint64_t seed = 0x5eed2024;
};

namespace detail {

inline Clause within_rel(std::string name, double measured, double target, double rel) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6g +/- %.3g%%", target, rel * 100.0);
  return {std::move(name), measured, buf, std::abs(measured / target - 1.0) <= rel};
}

inline Clause within_range(std::string name, double measured, double lo, double hi) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "[%.6g, %.6g]", lo, hi);
  return {std::move(name), measured, buf, measured >= lo && measured <= hi};
}

/// Device mode with the quoted parameters.
inline TorsionMode quoted_device_mode() {
  return TorsionMode::from_quality(2.0 * pi * 52.5e3, 3.3e7, 3.8e-18, 295.0);
}

/// Device mode from the ribbon geometry with the measured frequency and Q.
inline TorsionMode device_mode() {
  TorsionMode m = derive_mode(RibbonGeometry{}, 295.0, 3.3e7);
  m.omega_m = 2.0 * pi * 52.5e3;
  m.gamma_m = m.omega_m / 3.3e7;
  return m;
}

/// Same inertia and frequency with a desk-scale Q for time-domain runs.
inline TorsionMode desk_mode(double q = 1e3) {
  const TorsionMode d = device_mode();
  return TorsionMode::from_quality(d.omega_m, q, d.inertia, d.temperature);
}

inline DiffractionScene curved_scene(double w0) {
  DiffractionScene s;
  s.geom.width = 400e-6;
  s.geom.profile_curvature = 1.0 / (2.0 * 0.03);  // R_r = 3 cm
  s.beam.wavelength = 850e-9;
  s.beam.waist = w0;
  return s;
}

inline double circular_mean(const std::vector<double>& phases) {
  double s = 0, c = 0;
  for (double p : phases) {
    s += std::sin(p);
    c += std::cos(p);
  }
  return std::atan2(s, c);
}

}  // namespace detail

inline CriterionResult thermal_torque(const Options& o) {
  CriterionResult r{1, "thermal torque amplitude", {}, {}};
  const auto m = detail::quoted_device_mode();
  r.clauses.push_back(detail::within_rel("sqrt(S_tau_th) [N m/rtHz]",
                                         std::sqrt(thermal_torque_psd(m, o.constants)), 2.5e-20, 0.05));
  return r;
}

inline CriterionResult zero_point(const Options& o) {
  CriterionResult r{2, "zero-point peak and bath occupation", {}, {}};
  const auto m = detail::quoted_device_mode();
  r.clauses.push_back(detail::within_rel("sqrt(S_zp) [rad/rtHz]",
                                         std::sqrt(zero_point_psd_peak(m, o.constants)), 1.3e-10, 0.03));
  r.clauses.push_back(detail::within_rel("n_th", thermal_occupation(m, o.constants), 1.2e8, 0.05));
  return r;
}

inline CriterionResult uncertainty_product(const Options& o) {
  CriterionResult r{3, "imprecision-backaction product", {}, {}};
  const double target = 0.5 * pi * codata.hbar * codata.hbar;
  Detector det;
  double worst = 0;
  double worst_val = target;
  for (double p : logspace(1e-6, 1.0, 25)) {
    ProbeBeam b;
    b.power = p;
    const double prod = imprecision_psd(b, det, o.constants) * backaction_torque_psd(b, o.constants);
    const double dev = std::abs(prod / target - 1.0);
    if (dev >= worst) {
      worst = dev;
      worst_val = prod;
    }
  }
  r.clauses.push_back(
      detail::within_rel("S_imp * S_BA, worst over 1 uW..1 W [(J s)^2]", worst_val, target, 1e-3));
  return r;
}

inline CriterionResult sql_relation(const Options& o) {
  CriterionResult r{4, "standard quantum limit from a power scan", {}, {}};
  const auto m = detail::device_mode();
  Detector det;
  ProbeBeam b;
  const auto opt = sql_optimal_power(b, det, m, o.constants);
  double best = std::numeric_limits<double>::infinity();
  for (double p : logspace(opt.P_opt * 1e-3, opt.P_opt * 1e3, 20001)) {
    b.power = p;
    best = std::min(best, added_noise_on_resonance(b, det, m, o.constants));
  }
  const double target = zero_point_psd_peak(m, o.constants) / std::sqrt(det.total_efficiency());
  r.clauses.push_back(detail::within_rel("min added noise [rad^2/Hz]", best, target, 0.01));
  return r;
}

inline CriterionResult diffraction_oracle(const Options& o) {
  CriterionResult r{5, "flat-ribbon diffraction vs closed form", {}, {}};
  for (double w0 : {10e-6, 20e-6, 50e-6}) {
    DiffractionScene s;
    s.geom.width = 400e-6;
    s.beam.waist = w0;
    const double num = spd_sensitivity(s, o.constants).S_imp;
    const double eq = imprecision_psd(s.beam, Detector{}, o.constants);
    char name[64];
    std::snprintf(name, sizeof name, "S_imp(w0 = %.0f um) / closed form", w0 * 1e6);
    r.clauses.push_back(detail::within_rel(name, num / eq, 1.0, 0.01));
  }
  return r;
}

inline CriterionResult curved_optimum(const Options& o) {
  CriterionResult r{6, "curved-ribbon waist optimum", {}, {}};
  const auto scene = detail::curved_scene(60e-6);
  std::vector<double> waists;
  for (double w = 20e-6; w <= 150e-6 + 1e-12; w += 2.5e-6) waists.push_back(w);
  const auto pts = sweep_waist(scene, waists, o.threads, o.constants);
  double best = std::numeric_limits<double>::infinity(), w_best = 0;
  for (const auto& p : pts)
    if (p.result && p.result->S_imp < best) {
      best = p.result->S_imp;
      w_best = p.param;
    }
  r.clauses.push_back(detail::within_range("waist at minimum S_imp [m]", w_best, 50e-6, 70e-6));
  const double wc = critical_compensation_waist(scene.geom, scene.beam.wavelength);
  r.clauses.push_back(detail::within_range("critical compensation waist [m]", wc, 61.7e-6, 65.7e-6));
  return r;
}

inline CriterionResult compensation(const Options& o) {
  CriterionResult r{7, "wavefront compensation by defocus", {}, {}};
  const auto scene = detail::curved_scene(60e-6);
  std::vector<double> zs;
  for (int i = 0; i <= 60; ++i) zs.push_back(-30e-3 + 0.5e-3 * i);
  const auto sweep = sweep_focus(scene, zs, o.threads, o.constants);
  r.clauses.push_back(
      detail::within_range("|z| at minimum S_imp [m]", std::abs(sweep.optimal_z), 13e-3, 15e-3));

  ProbeBeam at = scene.beam;
  at.focus_offset = sweep.optimal_z;
  ProbeBeam flat = at;
  flat.waist = at.spot_size();
  flat.focus_offset = 0;
  const double flat_value = imprecision_psd(flat, Detector{}, o.constants);
  r.clauses.push_back(
      detail::within_rel("S_imp(z_opt) / flat-ribbon S_imp at w(z)", sweep.S_imp_opt / flat_value, 1.0, 0.05));

  ProbeBeam rz = scene.beam;
  rz.focus_offset = rz.rayleigh_range();
  r.clauses.push_back(detail::within_rel("backaction penalty (w/w0)^2 at z_R", rz.spot_area_ratio(), 2.0, 0.05));
  return r;
}

inline CriterionResult monte_carlo(const Options& o) {
  CriterionResult r{8, "photon-counting backaction", {}, {}};
  PhotonStreamConfig cfg;
  cfg.beam.power = 1e-3;
  cfg.beam.waist = 60e-6;
  cfg.dt = 1e-9;
  cfg.duration = 16384 * cfg.dt;
  cfg.seed = o.seed;
  const auto est = estimate_backaction_psd(cfg, 4, o.threads, o.constants);
  const double eq = backaction_torque_psd(cfg.beam, o.constants);
  r.clauses.push_back(detail::within_rel("S_tau / closed form", est.S_tau / eq, 1.0, 0.05));
  r.clauses.push_back({"photons simulated", static_cast<double>(est.n_photons), ">= 1e6",
                       est.n_photons >= 1000000});
  r.clauses.push_back({"|mean torque| / stderr", std::abs(est.mean_torque) / est.mean_stderr, "<= 3",
                       std::abs(est.mean_torque) <= 3.0 * est.mean_stderr});
  return r;
}

inline CriterionResult cooling_floors(const Options& o) {
  CriterionResult r{9, "feedback cooling floors", {}, {}};
  const auto m = detail::device_mode();
  FeedbackConfig fc{0, 0.004, m};
  const double n1 = optimal_gain(fc, o.constants).n_min;
  r.clauses.push_back(detail::within_range("min n_m at n_imp = 0.004 (rounds to 1.4e3)", n1, 1350, 1450));
  fc.n_imp = 0.06;
  const double n2 = optimal_gain(fc, o.constants).n_min;
  r.clauses.push_back(detail::within_range("min n_m at n_imp = 0.06", n2, 5.2e3, 5.4e3));

  NoiseBudget b;
  b.n_imp = 0.004;
  r.clauses.push_back(detail::within_range("dB below SQL at n_imp = 0.004", b.db_below_sql(), 17.8, 18.2));

  ProbeBeam ten;
  ten.power = 10e-3;
  const double ideal = imprecision_psd(ten, Detector{}, o.constants);
  r.clauses.push_back({"ideal floor at 10 mW [rad^2/Hz] <= measured 1.4e-22", ideal, "<= 1.4e-22",
                       ideal <= 1.4e-22});
  return r;
}

inline CriterionResult time_domain(const Options& o) {
  CriterionResult r{10, "time-domain oracle at Q = 1e3", {}, {}};
  const auto& k = o.constants;
  const auto m = detail::desk_mode();
  const double period = 2.0 * pi / m.omega_m;
  const double f_m = m.omega_m / (2.0 * pi);
  const double lw = m.gamma_m / (2.0 * pi);

  // Equipartition and the thermal PSD, averaged over independently seeded runs.
  {
    constexpr unsigned replicas = 4;
    struct Run {
      double variance = 0;
      EstimatedSpectrum psd;
    };
    const auto runs = optolever::detail::parallel_map<Run>(replicas, o.threads, [&](std::size_t i) {
      SimConfig c;
      c.mode = m;
      c.dt = period / 20.0;
      c.duration = 10.0;
      c.settle = 20.0 / m.gamma_m;
      c.seed = o.seed + 1000 * (i + 1);
      c.record_stride = 4;
      c.spectra_requested = true;
      const auto s = integrate(c, k);
      return Run{s.theta_variance, estimate_psd(s.theta, s.dt, 1u << 16)};
    });
    const double kt = k.k_B * m.temperature / (m.inertia * m.omega_m * m.omega_m);
    double var = 0;
    for (const auto& run : runs) var += run.variance / replicas;
    r.clauses.push_back(detail::within_rel("<theta^2> / (k_B T / I w^2)", var / kt, 1.0, 0.10));

    const double s_th = thermal_torque_psd(m, k);
    double est = 0, ana = 0;
    const auto& f = runs.front().psd.freqs;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (std::abs(f[i] - f_m) <= lw) {
        for (const auto& run : runs) est += run.psd.psd[i] / replicas;
        ana += std::norm(susceptibility(m, 2.0 * pi * f[i])) * s_th;
      }
    r.clauses.push_back(detail::within_rel("PSD / |chi|^2 S_th within one linewidth", est / ana, 1.0, 0.10));
  }

  // Ringdown.
  {
    SimConfig c;
    c.mode = m;
    c.drives.thermal = false;
    c.dt = period / 20.0;
    c.duration = 8.0 / m.gamma_m;
    c.theta0 = 1e-6;
    const auto s = integrate(c, k);
    r.clauses.push_back(
        detail::within_rel("ringdown Q / true Q", ringdown_q(s.theta, s.dt, m.omega_m) / m.quality(), 1.0, 0.05));
  }

  // Cold damping across a decade of gamma_eff.
  {
    const double n_imp = thermal_occupation(m, k) / 100.0;
    const double s_imp = imprecision_for_quanta(n_imp, m, k);
    for (double ratio : {4.0, 10.0, 40.0}) {
      SimConfig c;
      c.mode = m;
      c.dt = period / 100.0;
      c.duration = 2.0;
      c.seed = o.seed + static_cast<std::uint64_t>(ratio);
      c.imprecision_psd = s_imp;
      c.drives.feedback = FeedbackDrive{(ratio - 1.0) * m.gamma_m};
      c.record_stride = 10;
      const auto run = cold_damp_run(c, k);
      const double formula = phonon_number(FeedbackConfig{(ratio - 1.0) * m.gamma_m, n_imp, m}, k);
      char name[80];
      std::snprintf(name, sizeof name, "n_m / weak-backaction formula at gamma_eff = %.0f gamma_m", ratio);
      r.clauses.push_back(detail::within_rel(name, run.n_m / formula, 1.0, 0.15));
    }
  }

  // Coherence with a dominant position-modulated drive.
  {
    SimConfig c;
    c.mode = m;
    c.dt = period / 20.0;
    c.duration = 4.0;
    c.seed = o.seed + 99;
    const double s_th = thermal_torque_psd(m, k);
    const double power = 1e-3;
    const double lever = 2.0 * power / k.c;
    c.drives.position = PositionDrive{power, 10.0 * s_th / (lever * lever)};
    const double peak = std::norm(susceptibility(m, m.omega_m)) * s_th;
    c.imprecision_psd = 1e-4 * peak;
    c.record.theta = false;
    c.record.measured = true;
    c.record.drive_x = true;
    c.settle = 0.5 * c.duration;
    const auto s = integrate(c, k);
    const auto coh = coherence(s.measured, s.drive_x, s.dt, 1u << 16);
    double cmin = 1.0;
    std::vector<double> below, above;
    for (std::size_t i = 0; i < coh.freqs.size(); ++i) {
      const double d = coh.freqs[i] - f_m;
      if (std::abs(d) <= 0.5 * lw) cmin = std::min(cmin, coh.magnitude[i]);
      if (d >= -10 * lw && d <= -4 * lw) below.push_back(coh.phase[i]);
      if (d >= 4 * lw && d <= 10 * lw) above.push_back(coh.phase[i]);
    }
    r.clauses.push_back({"min |C| within half a linewidth", cmin, "> 0.9", cmin > 0.9});
    double jump = std::abs(detail::circular_mean(above) - detail::circular_mean(below));
    if (jump > pi) jump = 2.0 * pi - jump;
    r.clauses.push_back(detail::within_range("phase change of C across resonance [rad]", jump, pi - 0.3, pi));
  }
  return r;
}

inline CriterionResult calibration(const Options& o) {
  CriterionResult r{11, "calibration round trips", {}, {}};
  const auto& k = o.constants;
  const auto m = detail::device_mode();
  const double f_m = m.omega_m / (2.0 * pi);
  const double lw = m.gamma_m / (2.0 * pi);
  const auto freqs = linspace(f_m - 20 * lw, f_m + 20 * lw, 2001);

  const double g = 2.0e6;  // V/rad
  const double peak = g * g * thermal_torque_psd(m, k) * std::norm(susceptibility(m, m.omega_m));
  const auto raw = synthetic_thermal_spectrum(m, g, 0.01 * peak, freqs, 400, o.seed, k);
  const auto boot = bootstrap_calibration(raw, m, k);
  r.clauses.push_back(detail::within_rel("bootstrap gain / true gain", boot.g / g, 1.0, 0.01));

  const double lever = 0.5;
  const auto dx = linspace(-50e-6, 50e-6, 21);
  const auto volts = synthetic_lateral_scan(g, lever, dx, 0.05 * g / (2 * lever) * 50e-6, o.seed + 1);
  const auto line = fit_lateral_slope(dx, volts);
  const double g_lat = lateral_calibration(line.slope, lever);
  const double s_lat = 2.0 * lever * line.slope_stderr;
  const double gap = std::abs(g_lat - boot.g) / std::hypot(s_lat, boot.g_stderr);
  r.clauses.push_back({"|lateral - bootstrap| / combined sigma", gap, "<= 2", gap <= 2.0});

  const double s_th = thermal_torque_psd(m, k);
  const double chi_pk = std::abs(susceptibility(m, m.omega_m));
  const double s_im = 2.5 * s_th;
  const double s_imp = 0.01 * (s_im + s_th) * chi_pk * chi_pk;
  for (double sign : {+1.0, -1.0}) {
    const double c_true = sign * 0.3 * s_th * chi_pk;
    const auto spec = synthetic_correlated_spectrum(m, s_imp, s_im, c_true, s_th, freqs, 400,
                                                    o.seed + (sign > 0 ? 2 : 3));
    const auto fit = fit_correlations(spec, m, s_th);
    if (sign > 0)
      r.clauses.push_back(detail::within_rel("fitted S_tau_IM / S_th", fit.S_tau_IM / s_th, 2.5, 0.10));
    const bool ok = fit.C * sign > 0 && std::abs(fit.C) > 3.0 * fit.C_stderr;
    r.clauses.push_back({sign > 0 ? "sign of C (positive input)" : "sign of C (negative input)",
                         fit.C / std::abs(c_true), sign > 0 ? "> 0" : "< 0", ok});
  }
  return r;
}

using Check = std::function<CriterionResult(const Options&)>;

inline std::vector<Check> all_checks() {
  return {thermal_torque, zero_point,  uncertainty_product, sql_relation,
          diffraction_oracle, curved_optimum, compensation, monte_carlo,
          cooling_floors, time_domain, calibration};
}

/// Runs a check, turning an exception into a failed criterion.
inline CriterionResult run_guarded(const Check& check, const Options& o, int id) {
  try {
    return check(o);
  } catch (const std::exception& e) {
    CriterionResult r;
    r.id = id;
    r.title = "criterion " + std::to_string(id);
    r.error = e.what();
    return r;
  }
}

inline std::vector<CriterionResult> run_all(const Options& o = {}) {
  std::vector<CriterionResult> out;
  const auto checks = all_checks();
  for (std::size_t i = 0; i < checks.size(); ++i)
    out.push_back(run_guarded(checks[i], o, static_cast<int>(i + 1)));
  return out;
}

inline std::string summary_line(const CriterionResult& r) {
  std::string s = (r.passed() ? "PASS " : "FAIL ") + std::to_string(r.id) + " " + r.title;
  if (!r.error.empty()) return s + " (error: " + r.error + ")";
  for (const auto& c : r.clauses) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "\n     %s %s = %.6g, want %s", c.passed ? "ok  " : "FAIL",
                  c.name.c_str(), c.measured, c.target.c_str());
    s += buf;
  }
  return s;
}

}  // namespace optolever::acceptance
