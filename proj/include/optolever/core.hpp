#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "errors.hpp"

namespace optolever {

inline constexpr double pi = std::numbers::pi;

/// CODATA 2018 exact/recommended values in SI units.
struct PhysicalConstants {
  double hbar;  // J s
  double k_B;   // J/K
  double c;     // m/s
};

inline constexpr PhysicalConstants codata{1.054571817e-34, 1.380649e-23,
                                          299792458.0};

/// Physical parameters of a tensioned ribbon plus its fitted surface profile
/// y(x) = profile_offset + profile_tilt * x + profile_curvature * x^2.
struct RibbonGeometry {
  double length = 7e-3;        // m
  double width = 400e-6;       // m
  double thickness = 75e-9;    // m
  double stress = 0.85e9;      // Pa
  double density = 2700.0;     // kg/m^3
  double youngs_modulus = 250e9;  // Pa
  double intrinsic_q = 1000.0;
  double profile_offset = 0.0;     // m
  double profile_tilt = 0.0;       // dimensionless
  double profile_curvature = 0.0;  // 1/m

  void validate() const {
    detail::require(thickness > 0 && width > thickness && length > width,
                    "ribbon dimensions must satisfy length > width > thickness > 0");
    detail::require(stress > 0 && density > 0 && youngs_modulus > 0 && intrinsic_q > 0,
                    "stress, density, modulus and intrinsic Q must be positive");
    detail::require(std::isfinite(profile_offset) && std::isfinite(profile_tilt) &&
                        std::isfinite(profile_curvature),
                    "surface profile coefficients must be finite");
  }

  /// Radius of curvature of the parabolic profile, 1/(2 Ap); infinite when flat.
  [[nodiscard]] double curvature_radius() const {
    if (profile_curvature == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (2.0 * profile_curvature);
  }
};

struct TorsionMode {
  double omega_m = 0;      // rad/s
  double gamma_m = 0;      // rad/s
  double inertia = 0;      // kg m^2
  double temperature = 0;  // K

  [[nodiscard]] double quality() const { return omega_m / gamma_m; }
  /// Spectral formulas assume Q >> 1.
  [[nodiscard]] bool high_q() const { return quality() >= 10.0; }

  void validate() const {
    detail::require(std::isfinite(omega_m) && omega_m > 0, "omega_m must be positive");
    detail::require(std::isfinite(gamma_m) && gamma_m > 0, "gamma_m must be positive");
    detail::require(std::isfinite(inertia) && inertia > 0, "moment of inertia must be positive");
    detail::require(std::isfinite(temperature) && temperature > 0,
                    "temperature must be positive");
  }

  static TorsionMode from_quality(double omega_m, double q, double inertia, double temperature) {
    TorsionMode m{omega_m, omega_m / q, inertia, temperature};
    m.validate();
    return m;
  }
};

/// Gaussian probe. focus_offset is the signed distance of the waist from the
/// ribbon; negative values put the focus before the ribbon.
struct ProbeBeam {
  double wavelength = 850e-9;   // m
  double power = 1e-3;          // W
  double waist = 60e-6;         // m (1/e^2 intensity radius)
  double focus_offset = 0.0;    // m
  double lever_arm = 0.5;       // m
  double lateral_offset = 0.0;  // m

  void validate() const {
    detail::require(wavelength > 0 && std::isfinite(wavelength), "wavelength must be positive");
    detail::require(power > 0 && std::isfinite(power), "power must be positive");
    detail::require(waist > 0 && std::isfinite(waist), "waist must be positive");
    detail::require(lever_arm > 0 && std::isfinite(lever_arm), "lever arm must be positive");
    detail::require(std::isfinite(focus_offset) && std::isfinite(lateral_offset),
                    "focus and lateral offsets must be finite");
  }

  [[nodiscard]] double wavenumber() const { return 2.0 * pi / wavelength; }
  [[nodiscard]] double divergence() const { return wavelength / (pi * waist); }
  [[nodiscard]] double rayleigh_range() const { return pi * waist * waist / wavelength; }

  [[nodiscard]] double spot_size_at(double z) const {
    const double r = z / rayleigh_range();
    return waist * std::sqrt(1.0 + r * r);
  }
  [[nodiscard]] double spot_size() const { return spot_size_at(focus_offset); }

  /// Signed wavefront radius z (1 + (z_R/z)^2); infinite at the waist.
  [[nodiscard]] double wavefront_radius_at(double z) const {
    if (z == 0.0) return std::numeric_limits<double>::infinity();
    const double r = rayleigh_range() / z;
    return z * (1.0 + r * r);
  }
  [[nodiscard]] double wavefront_radius() const { return wavefront_radius_at(focus_offset); }

  /// Backaction penalty (w/w0)^2 of a defocused spot.
  [[nodiscard]] double spot_area_ratio() const {
    const double r = spot_size() / waist;
    return r * r;
  }
};

/// Split-photodetector receiver. The split geometry caps the efficiency at 2/pi.
struct Detector {
  static constexpr double split_efficiency = 2.0 / pi;

  double eta_d = 1.0;
  double extraneous_floor = 0.0;  // rad^2/Hz

  void validate() const {
    detail::require(eta_d > 0 && eta_d <= 1.0, "detector efficiency must lie in (0, 1]");
    detail::require(extraneous_floor >= 0 && std::isfinite(extraneous_floor),
                    "extraneous imprecision must be non-negative");
  }

  [[nodiscard]] double total_efficiency() const { return split_efficiency * eta_d; }
};

/// Torsion mode of a stressed ribbon. Frequency from the string-like torsion
/// dispersion, inertia of a thin rectangular plate about its long axis, and
/// Q from dissipation dilution unless a measured value is supplied.
inline TorsionMode derive_mode(const RibbonGeometry& geom, double temperature,
                               std::optional<double> q_override = std::nullopt) {
  geom.validate();
  detail::require(temperature > 0 && std::isfinite(temperature), "temperature must be positive");
  const double omega = (pi / geom.length) * std::sqrt(geom.stress / geom.density);
  const double w = geom.width;
  const double inertia = geom.density * geom.length * geom.thickness * w * w * w / 24.0;
  const double q = q_override ? *q_override
                              : geom.intrinsic_q * geom.stress * w * w /
                                    (geom.youngs_modulus * geom.thickness * geom.thickness);
  detail::require(q > 0, "quality factor must be positive");
  TorsionMode mode{omega, omega / q, inertia, temperature};
  if (!std::isfinite(mode.omega_m) || !std::isfinite(mode.gamma_m) ||
      !std::isfinite(mode.inertia)) {
    throw ParameterError("derived torsion mode is not finite");
  }
  return mode;
}

/// Single-sided white thermal torque PSD 4 k_B T I gamma_m, N^2 m^2/Hz.
inline double thermal_torque_psd(const TorsionMode& mode,
                                 const PhysicalConstants& k = codata) {
  detail::require(mode.temperature > 0, "temperature must be positive");
  return 4.0 * k.k_B * mode.temperature * mode.inertia * mode.gamma_m;
}

/// Peak zero-point angle PSD 2 hbar Q / (I omega_m^2), rad^2/Hz.
inline double zero_point_psd_peak(const TorsionMode& mode,
                                  const PhysicalConstants& k = codata) {
  return 2.0 * k.hbar * mode.quality() / (mode.inertia * mode.omega_m * mode.omega_m);
}

/// Zero-point torque PSD that produces zero_point_psd_peak through |chi|^2.
inline double zero_point_torque_psd(const TorsionMode& mode,
                                    const PhysicalConstants& k = codata) {
  return 2.0 * k.hbar * mode.inertia * mode.omega_m * mode.gamma_m;
}

/// High-temperature bath occupation k_B T / (hbar omega_m).
inline double thermal_occupation(const TorsionMode& mode,
                                 const PhysicalConstants& k = codata) {
  return k.k_B * mode.temperature / (k.hbar * mode.omega_m);
}

}  // namespace optolever
