// Prints the quantum noise budget of the reference torsion ribbon probed
// at a few optical powers.
#include <cmath>
#include <cstdio>

#include <optolever/feedback.hpp>
#include <optolever/spectra.hpp>

int main() {
  using namespace optolever;
  const TorsionMode derived = derive_mode(RibbonGeometry{}, 295.0, 3.3e7);
  // Measured frequency, derived inertia.
  const TorsionMode mode =
      TorsionMode::from_quality(2.0 * pi * 52.5e3, 3.3e7, derived.inertia, 295.0);

  std::printf("f_m = %.1f kHz  I = %.3g kg m^2  n_th = %.3g\n", mode.omega_m / (2e3 * pi),
              mode.inertia, thermal_occupation(mode));
  std::printf("sqrt(S_th) = %.3g N m/rtHz  sqrt(S_zp) = %.3g rad/rtHz\n\n",
              std::sqrt(thermal_torque_psd(mode)), std::sqrt(zero_point_psd_peak(mode)));

  Detector det;
  std::printf("%10s %12s %12s %8s %10s\n", "P [W]", "S_imp", "S_tau_BA", "n_imp", "dB<SQL");
  for (double p : {1e-5, 1e-4, 1e-3, 1e-2}) {
    ProbeBeam beam;
    beam.power = p;
    const auto b = budget(beam, det, mode);
    std::printf("%10.1e %12.3e %12.3e %8.4f %10.2f\n", p, b.S_imp, b.S_tau_BA, b.n_imp,
                b.db_below_sql());
  }

  const auto sql = sql_optimal_power(ProbeBeam{}, det, mode);
  std::printf("\nSQL power %.3g W, added noise %.3g rad^2/Hz\n", sql.P_opt, sql.added_min);

  const FeedbackConfig fb{0.0, 0.004, mode};
  const auto opt = optimal_gain(fb);
  std::printf("cold damping floor n_min = %.0f at gamma_eff = %.3g rad/s\n", opt.n_min,
              opt.gamma_eff_opt);
}
