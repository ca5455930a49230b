#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "core.hpp"
#include "parallel.hpp"
#include "spectra.hpp"

// Fraunhofer model of an optical lever reflecting off a finite, parabolically
// curved ribbon. The y' integral of the aperture is Gaussian and done in closed
// form; only the x' integral over the ribbon width is numerical.
//
// Phase conventions at the ribbon surface:
//   reflection off the profile  phi_r(x') = 2 k (Ap x'^2 + Al x')
//   incident wavefront          phi_b(x') = k x'^2 / (2 R(z)), R signed
// With Ap > 0 the two quadratic terms cancel for a focus placed before the
// ribbon (z < 0).

namespace optolever {

struct DiffractionGrid {
  int panels = 16;                // x' subintervals, each integrated adaptively
  double domain_halfwidth = 6.0;  // x' half-range in units of w(z), further clipped by the ribbon
  double farfield_extent = 8.0;   // far-field half-range in units of the broadened lobe
  int farfield_points = 1025;     // odd (composite Simpson)
  double rel_tol = 1e-9;
  unsigned max_depth = 12;
};

struct DiffractionScene {
  RibbonGeometry geom;
  ProbeBeam beam;
  double eta_d = 1.0;
  DiffractionGrid grid;

  void validate() const {
    detail::require(geom.width > 0, "ribbon width must be positive");
    detail::require(std::isfinite(geom.profile_curvature) && std::isfinite(geom.profile_tilt),
                    "profile coefficients must be finite");
    beam.validate();
    detail::require(eta_d > 0 && eta_d <= 1, "detector efficiency must lie in (0, 1]");
    detail::require(grid.panels >= 1, "panel count must be positive");
    detail::require(grid.domain_halfwidth >= 4.0,
                    "integration domain must cover at least 4 w(z)");
    detail::require(grid.farfield_points >= 3 && grid.farfield_points % 2 == 1,
                    "far-field point count must be odd and >= 3");
    detail::require(grid.farfield_extent > 0, "far-field extent must be positive");
  }
};

struct SensitivityResult {
  double dDeltaP_dx = 0;      // W/m, SPD difference slope at balance
  double S_imp = 0;           // rad^2/Hz
  double w_eff = 0;           // m, spot on the ribbon
  double balance_x = 0;       // m, far-field balance point
  double reflected_power = 0; // W
  std::vector<std::string> warnings;
};

struct SweepPoint {
  double param = 0;
  std::optional<SensitivityResult> result;
  std::string error;
};

struct FocusSweep {
  std::vector<SweepPoint> points;
  std::size_t best = 0;
  double optimal_z = 0;
  double S_imp_opt = 0;
  double backaction_penalty = 0;  // (w(z_opt)/w0)^2
};

namespace diffraction_detail {

using cplx = std::complex<double>;

inline double aperture_halfwidth(const DiffractionScene& s) {
  return std::min(0.5 * s.geom.width, s.grid.domain_halfwidth * s.beam.spot_size());
}

inline double inverse_radius(const ProbeBeam& b) {
  const double r = b.wavefront_radius();
  return std::isinf(r) ? 0.0 : 1.0 / r;
}

/// Net coefficient of x'^2 in the aperture phase.
inline double quadratic_phase(const DiffractionScene& s) {
  const double k = s.beam.wavenumber();
  return 2.0 * k * s.geom.profile_curvature + 0.5 * k * inverse_radius(s.beam);
}

/// Far-field half-width (m) containing the broadened diffraction lobe.
inline double lobe_width(const DiffractionScene& s) {
  const double w = s.beam.spot_size();
  const double c = quadratic_phase(s);
  const double lam = s.beam.wavelength;
  // Unclipped Gaussian with residual curvature c diverges as (lam/pi) sqrt(1/w^2 + c^2 w^2).
  const double theta = (lam / pi) * std::sqrt(1.0 / (w * w) + c * c * w * w);
  const double edge = lam / s.geom.width;
  return s.beam.lever_arm * std::max({theta, edge, s.beam.divergence()});
}

inline double farfield_center(const DiffractionScene& s) {
  return 2.0 * s.geom.profile_tilt * s.beam.lever_arm;
}

template <class F>
auto integrate_checked(F&& f, double a, double b, const DiffractionGrid& g, const char* what) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0, l1 = 0;
  auto value = gauss_kronrod<double, 31>::integrate(f, a, b, g.max_depth, g.rel_tol, &err, &l1);
  if (!(err <= 1e3 * g.rel_tol * l1 + 1e-300) || !std::isfinite(std::abs(value))) {
    throw NumericalError(std::string("quadrature did not converge (") + what +
                         "): interval [" + std::to_string(a) + ", " + std::to_string(b) +
                         "], error estimate " + std::to_string(err) + ", L1 " +
                         std::to_string(l1));
  }
  return value;
}

/// x' field integral F(x) = int a(x') exp(-i k x x'/L) dx' over the clipped aperture.
inline cplx x_integral(const DiffractionScene& s, double x) {
  const double k = s.beam.wavenumber();
  const double w = s.beam.spot_size();
  const double c = quadratic_phase(s);
  const double tilt = 2.0 * k * s.geom.profile_tilt;
  const double kx = k * x / s.beam.lever_arm;
  const double half = aperture_halfwidth(s);
  auto integrand = [&](double xp) {
    const double amp = -xp * xp / (w * w);
    const double phase = c * xp * xp + (tilt - kx) * xp;
    return std::exp(amp) * cplx(std::cos(phase), std::sin(phase));
  };
  cplx total = 0;
  const int n = s.grid.panels;
  for (int i = 0; i < n; ++i) {
    const double a = -half + 2.0 * half * i / n;
    const double b = -half + 2.0 * half * (i + 1) / n;
    total += integrate_checked(integrand, a, b, s.grid, "aperture x'");
  }
  return total;
}

/// Peak intensity scale A^2 = 2P/(pi w^2) of the incident field.
inline double intensity_scale(const DiffractionScene& s) {
  const double w = s.beam.spot_size();
  return 2.0 * s.beam.power / (pi * w * w);
}

/// Far-field power per unit x at the detector plane (W/m), y integrated.
inline double line_power(const DiffractionScene& s, double x) {
  const double w = s.beam.spot_size();
  const double lam_l = s.beam.wavelength * s.beam.lever_arm;
  return intensity_scale(s) * w * std::sqrt(pi / 2.0) * std::norm(x_integral(s, x)) / lam_l;
}

}  // namespace diffraction_detail

/// Complex field amplitude at detector-plane point (x, y), normalised so that
/// |E|^2 integrates to the reflected power (W/m^2).
inline std::complex<double> far_field(const DiffractionScene& scene, double x, double y) {
  using namespace diffraction_detail;
  scene.validate();
  const double k = scene.beam.wavenumber();
  const double w = scene.beam.spot_size();
  const double lam_l = scene.beam.wavelength * scene.beam.lever_arm;
  // y' integral: int exp(-a y'^2 - i b y') dy' = sqrt(pi/a) exp(-b^2/(4a)).
  const cplx a(1.0 / (w * w), -0.5 * k * inverse_radius(scene.beam));
  const double b = k * y / scene.beam.lever_arm;
  const cplx gy = std::sqrt(pi / a) * std::exp(-b * b / (4.0 * a));
  const double amp = std::sqrt(intensity_scale(scene));
  return amp * gy * x_integral(scene, x) / (cplx(0.0, 1.0) * lam_l);
}

/// Aperture phase (rad) at x' on the ribbon: reflection plus incident wavefront.
inline double aperture_phase(const DiffractionScene& scene, double xp) {
  const double k = scene.beam.wavenumber();
  return diffraction_detail::quadratic_phase(scene) * xp * xp + 2.0 * k * scene.geom.profile_tilt * xp;
}

/// Power transmitted through the ribbon aperture, analytic.
inline double reflected_power(const DiffractionScene& scene) {
  const double w = scene.beam.spot_size();
  return scene.beam.power *
         std::erf(std::sqrt(2.0) * diffraction_detail::aperture_halfwidth(scene) / w);
}

/// Far-field power per unit detector-plane x, y integrated (W/m).
inline double far_field_line_power(const DiffractionScene& scene, double x) {
  scene.validate();
  return diffraction_detail::line_power(scene, x);
}

/// Far-field line power sampled on the detector grid.
struct FarFieldProfile {
  std::vector<double> x;
  std::vector<double> power;  // W/m
  double dx = 0;

  /// Composite Simpson integral of the whole profile.
  [[nodiscard]] double integral() const {
    double acc = 0;
    for (std::size_t i = 0; i + 2 < x.size(); i += 2)
      acc += power[i] + 4.0 * power[i + 1] + power[i + 2];
    return acc * dx / 3.0;
  }
};

inline FarFieldProfile far_field_profile(const DiffractionScene& scene) {
  using namespace diffraction_detail;
  scene.validate();
  const double half = scene.grid.farfield_extent * lobe_width(scene);
  const double center = farfield_center(scene);
  const int n = scene.grid.farfield_points;
  FarFieldProfile p;
  p.x = linspace(center - half, center + half, static_cast<std::size_t>(n));
  p.dx = 2.0 * half / (n - 1);
  p.power.resize(p.x.size());
  for (std::size_t i = 0; i < p.x.size(); ++i) p.power[i] = line_power(scene, p.x[i]);
  return p;
}

/// SPD difference signal Delta P(x) (W) for a split at detector position x.
inline double delta_power(const DiffractionScene& scene, double x) {
  using namespace diffraction_detail;
  scene.validate();
  const double half = scene.grid.farfield_extent * lobe_width(scene);
  const double center = farfield_center(scene);
  auto f = [&](double u) { return line_power(scene, u); };
  const double left = integrate_checked(f, center - half, x, scene.grid, "far field");
  const double right = integrate_checked(f, x, center + half, scene.grid, "far field");
  return left - right;
}

namespace diffraction_detail {

/// Balance point of the split detector. Symmetric apertures balance at the
/// centre; a tilted profile shifts the lobe and the root is bracketed on the
/// sampled profile, then refined.
inline double balance_point(const DiffractionScene& s) {
  const double center = farfield_center(s);
  if (s.geom.profile_tilt == 0.0) return center;
  const FarFieldProfile prof = far_field_profile(s);
  const std::size_t n = prof.x.size();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    cum[i] = cum[i - 1] + 0.5 * (prof.power[i] + prof.power[i - 1]) * prof.dx;
  const double total = cum.back();
  std::size_t j = 1;
  while (j < n && 2.0 * cum[j] - total < 0) ++j;
  if (j >= n) throw NumericalError("split detector cannot be balanced on the far-field grid");
  auto dp = [&](double x) { return delta_power(s, x); };
  boost::uintmax_t iters = 60;
  auto tol = boost::math::tools::eps_tolerance<double>(40);
  const auto [a, b] = boost::math::tools::toms748_solve(dp, prof.x[j - 1], prof.x[j], tol, iters);
  return 0.5 * (a + b);
}

}  // namespace diffraction_detail

/// Shot-noise-limited imprecision from the numerically computed SPD response.
inline SensitivityResult spd_sensitivity(const DiffractionScene& scene,
                                         const PhysicalConstants& k = codata) {
  using namespace diffraction_detail;
  scene.validate();
  SensitivityResult r;
  r.w_eff = scene.beam.spot_size();
  if (scene.beam.lever_arm < 10.0 * scene.beam.rayleigh_range())
    r.warnings.push_back("lever arm is not much larger than the Rayleigh range");

  r.balance_x = balance_point(scene);
  // Central difference of Delta P with step lam L / (100 pi w0); the difference
  // of the two one-sided integrals reduces to the power inside the window.
  const double h = scene.beam.wavelength * scene.beam.lever_arm / (100.0 * pi * scene.beam.waist);
  auto f = [&](double u) { return line_power(scene, u); };
  const double window = integrate_checked(f, r.balance_x - h, r.balance_x + h, scene.grid, "slope");
  r.dDeltaP_dx = 2.0 * window / (2.0 * h);
  if (!(r.dDeltaP_dx > 0) || !std::isfinite(r.dDeltaP_dx))
    throw NumericalError("degenerate scene: split detector slope is zero");

  r.reflected_power = reflected_power(scene);
  const double shot = 4.0 * pi * k.hbar * k.c * r.reflected_power / scene.beam.wavelength;
  const double dtheta = r.dDeltaP_dx * 2.0 * scene.beam.lever_arm;
  r.S_imp = shot / (scene.eta_d * dtheta * dtheta);
  return r;
}

inline std::vector<SweepPoint> sweep_waist(const DiffractionScene& scene,
                                           std::span<const double> waists, unsigned threads = 1,
                                           const PhysicalConstants& k = codata) {
  return detail::parallel_map<SweepPoint>(waists.size(), threads, [&](std::size_t i) {
    SweepPoint p;
    p.param = waists[i];
    try {
      DiffractionScene s = scene;
      s.beam.waist = waists[i];
      p.result = spd_sensitivity(s, k);
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    return p;
  });
}

inline FocusSweep sweep_focus(const DiffractionScene& scene, std::span<const double> offsets,
                              unsigned threads = 1, const PhysicalConstants& k = codata) {
  FocusSweep out;
  out.points = detail::parallel_map<SweepPoint>(offsets.size(), threads, [&](std::size_t i) {
    SweepPoint p;
    p.param = offsets[i];
    try {
      DiffractionScene s = scene;
      s.beam.focus_offset = offsets[i];
      p.result = spd_sensitivity(s, k);
    } catch (const std::exception& e) {
      p.error = e.what();
    }
    return p;
  });
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    const auto& r = out.points[i].result;
    if (r && r->S_imp < best) {
      best = r->S_imp;
      out.best = i;
    }
  }
  if (!std::isfinite(best)) throw NumericalError("focus sweep produced no valid points");
  out.optimal_z = out.points[out.best].param;
  out.S_imp_opt = best;
  ProbeBeam b = scene.beam;
  b.focus_offset = out.optimal_z;
  out.backaction_penalty = b.spot_area_ratio();
  return out;
}

/// Waist above which the largest wavefront curvature a Gaussian beam can
/// present, R(z_R) = 2 z_R, is flatter than the ribbon radius R_r.
inline double critical_compensation_waist(const RibbonGeometry& geom, double wavelength) {
  if (!(geom.profile_curvature > 0))
    throw ParameterError("ribbon has no positive curvature to compensate");
  return std::sqrt(geom.curvature_radius() * wavelength / (2.0 * pi));
}

/// Negative focus offset at which the incident wavefront cancels the
/// quadratic reflection phase, if the beam can reach that curvature. Of the
/// two solutions the one nearer the waist (smaller spot) is returned.
inline std::optional<double> compensation_focus(const RibbonGeometry& geom, const ProbeBeam& beam) {
  if (!(geom.profile_curvature > 0)) return std::nullopt;
  // k/(2|R|) = 2 k Ap  =>  |R| = 1/(4 Ap); solve |z| + z_R^2/|z| = |R|.
  const double target = 1.0 / (4.0 * geom.profile_curvature);
  const double zr = beam.rayleigh_range();
  const double disc = target * target - 4.0 * zr * zr;
  if (disc < 0) return std::nullopt;
  return -(target - std::sqrt(disc)) / 2.0;
}

/// Small-angle HG10 amplitude 2 i theta / theta_D of the reflected field.
inline std::complex<double> hg10_amplitude(const ProbeBeam& beam, double theta) {
  return {0.0, 2.0 * theta / beam.divergence()};
}

/// |dA10/dtheta| = 2/theta_D, rad^-1.
inline double hg10_readout_gain(const ProbeBeam& beam) {
  beam.validate();
  return 2.0 / beam.divergence();
}

}  // namespace optolever
