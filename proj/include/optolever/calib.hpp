#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "errors.hpp"
#include "least_squares.hpp"
#include "spectra.hpp"

// Fits to measured spectra. Averaged periodograms carry multiplicative
// chi-square noise, so every fit is weighted by the model itself and
// re-weighted until the weights settle.

namespace optolever {

struct RawSpectrum {
  std::vector<double> freqs;  // Hz
  std::vector<double> psd;    // V^2/Hz, or rad^2/Hz once calibrated

  [[nodiscard]] std::size_t size() const { return freqs.size(); }

  void validate() const {
    if (freqs.size() != psd.size()) throw DataError("spectrum columns differ in length");
    if (freqs.size() < 8) throw DataError("spectrum needs at least 8 points");
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      if (!(std::isfinite(psd[i]) && psd[i] > 0)) throw DataError("spectrum PSD must be positive");
      if (!(std::isfinite(freqs[i]) && freqs[i] >= 0))
        throw DataError("spectrum frequencies must be finite and >= 0");
      if (i > 0 && !(freqs[i] > freqs[i - 1]))
        throw DataError("spectrum frequency grid must be strictly increasing");
    }
  }
};

struct BootstrapCalibration {
  double g = 0;      // V/rad
  double floor = 0;  // V^2/Hz
  double g_stderr = 0;
  double floor_stderr = 0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (g, floor)
  double residual = 0;  // weighted reduced chi-square
  int iterations = 0;
};

struct CorrelationFit {
  double S_imp = 0;     // rad^2/Hz
  double S_tau_IM = 0;  // N^2 m^2/Hz
  double C = 0;         // rad N m/Hz
  double S_imp_stderr = 0;
  double S_tau_IM_stderr = 0;
  double C_stderr = 0;
  double residual = 0;  // weighted reduced chi-square
  double cost = 0;      // 0.5 sum of squared weighted residuals
  bool C_fixed = false;
};

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
};

namespace detail {

inline void require_span(const RawSpectrum& raw, const TorsionMode& mode) {
  const double f_m = mode.omega_m / (2.0 * pi);
  const double lw = mode.gamma_m / (2.0 * pi);
  if (raw.freqs.front() > f_m - 5.0 * lw || raw.freqs.back() < f_m + 5.0 * lw)
    throw DataError("spectrum must span at least 10 linewidths centred on the resonance");
}

/// Fit of data D to a model linear in `basis` columns with weights 1/M,
/// alternating a damped least-squares solve and a weight update. Parameters
/// flagged in `nonneg` are clamped at zero.
struct LinearModelFit {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double reduced_chi2 = 0;
  double cost = 0;
  int iterations = 0;
};

inline LinearModelFit fit_weighted_linear(const Eigen::VectorXd& data, const Eigen::MatrixXd& basis,
                                          const Eigen::VectorXd& offset, Eigen::VectorXd p0,
                                          const std::vector<bool>& nonneg) {
  const Eigen::Index n = basis.cols();
  // Column scales so the solver works on O(1) numbers.
  Eigen::VectorXd scale(n);
  const double dmax = data.cwiseAbs().maxCoeff();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double bmax = basis.col(j).cwiseAbs().maxCoeff();
    if (!(bmax > 0)) throw FitError("degenerate fit: a model term vanishes on the grid");
    scale[j] = dmax / bmax;
  }
  Eigen::VectorXd p = p0.cwiseQuotient(scale);
  auto model = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
    return offset + basis * q.cwiseProduct(scale);
  };
  auto project = [&](Eigen::VectorXd& q) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (nonneg[static_cast<std::size_t>(j)]) q[j] = std::max(q[j], 0.0);
  };

  Eigen::VectorXd weight = data;
  LeastSquaresResult fit;
  LinearModelFit out;
  for (int pass = 0; pass < 8; ++pass) {
    auto residual = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
      return (data - model(q)).cwiseQuotient(weight);
    };
    auto jacobian = [&](const Eigen::VectorXd&) -> Eigen::MatrixXd {
      Eigen::MatrixXd J(basis.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j)
        J.col(j) = -(basis.col(j) * scale[j]).cwiseQuotient(weight);
      return J;
    };
    DampedLeastSquares lm;
    fit = lm.solve(residual, jacobian, p, project);
    out.iterations += fit.iterations;
    const Eigen::VectorXd m = model(fit.params);
    if (m.minCoeff() <= 0) throw FitError("fitted model is not positive on the grid");
    const double change = (fit.params - p).norm() / std::max(fit.params.norm(), 1e-300);
    p = fit.params;
    weight = m;
    if (pass > 0 && change < 1e-10) break;
  }
  out.params = p.cwiseProduct(scale);
  out.covariance = scale.asDiagonal() * fit.covariance * scale.asDiagonal();
  out.reduced_chi2 = fit.reduced_chi2;
  out.cost = fit.cost;
  return out;
}

}  // namespace detail

/// Fits g^2 S_th |chi_m|^2 + floor to a detector-unit spectrum.
inline BootstrapCalibration bootstrap_calibration(const RawSpectrum& raw, const TorsionMode& mode,
                                                  const PhysicalConstants& k = codata) {
  raw.validate();
  mode.validate();
  detail::require_span(raw, mode);
  const auto n = static_cast<Eigen::Index>(raw.size());
  const double s_th = thermal_torque_psd(mode, k);
  Eigen::VectorXd data(n), shape(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    data[i] = raw.psd[u];
    shape[i] = s_th * std::norm(susceptibility(mode, 2.0 * pi * raw.freqs[u]));
  }

  // Start from the peak height above the far-wing level.
  std::vector<double> sorted(raw.psd);
  std::sort(sorted.begin(), sorted.end());
  const double floor0 = sorted[sorted.size() / 10];
  Eigen::Index ipk = 0;
  data.maxCoeff(&ipk);
  const double G0 = std::max(data[ipk] - floor0, data[ipk] * 0.5) / shape[ipk];

  Eigen::MatrixXd basis(n, 2);
  basis.col(0) = shape;
  basis.col(1).setOnes();
  Eigen::VectorXd p0(2);
  p0 << G0, floor0;
  const auto fit = detail::fit_weighted_linear(data, basis, Eigen::VectorXd::Zero(n), p0,
                                               {true, true});
  const double G = fit.params[0];
  if (!(G > 0)) throw FitError("thermal peak not found: fitted gain is zero");

  BootstrapCalibration out;
  out.g = std::sqrt(G);
  out.floor = fit.params[1];
  // Propagate from (g^2, floor) to (g, floor).
  Eigen::Matrix2d jac;
  jac << 0.5 / out.g, 0, 0, 1;
  out.covariance = jac * fit.covariance * jac.transpose();
  out.g_stderr = std::sqrt(std::max(out.covariance(0, 0), 0.0));
  out.floor_stderr = std::sqrt(std::max(out.covariance(1, 1), 0.0));
  out.residual = fit.reduced_chi2;
  out.iterations = fit.iterations;
  if (!std::isfinite(out.residual) || out.residual > 100.0) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "thermal model does not describe the data: weighted reduced chi-square %.3g",
                  out.residual);
    throw FitError(msg);
  }
  return out;
}

/// Angular gain from a lateral-displacement calibration, dV/dtheta = 2 L dV/dx.
inline double lateral_calibration(double dV_dx, double lever_arm) {
  detail::require(dV_dx > 0 && std::isfinite(dV_dx), "dV/dx must be positive");
  detail::require(lever_arm > 0 && std::isfinite(lever_arm), "lever arm must be positive");
  return 2.0 * lever_arm * dV_dx;
}

/// Ordinary least-squares line through a detector-translation scan.
inline LinearFit fit_lateral_slope(std::span<const double> dx, std::span<const double> volts) {
  if (dx.size() != volts.size() || dx.size() < 3)
    throw DataError("lateral scan needs at least 3 paired points");
  const auto n = static_cast<double>(dx.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    sx += dx[i];
    sy += volts[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    sxx += (dx[i] - mx) * (dx[i] - mx);
    sxy += (dx[i] - mx) * (volts[i] - my);
  }
  if (!(sxx > 0)) throw FitError("lateral scan has no spread in displacement");
  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double r = volts[i] - out.intercept - out.slope * dx[i];
    rss += r * r;
  }
  out.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  return out;
}

/// Fits S = S_imp + (S_tau_IM + S_th)|chi_m|^2 + C Re chi_m to a calibrated
/// angle spectrum with S_th held fixed. With fix_C_zero the symmetric model
/// (C = 0) is fitted instead.
inline CorrelationFit fit_correlations(const RawSpectrum& spectrum, const TorsionMode& mode,
                                       double S_tau_th, bool fix_C_zero = false) {
  spectrum.validate();
  mode.validate();
  detail::require(S_tau_th > 0 && std::isfinite(S_tau_th), "S_tau_th must be positive");
  const auto n = static_cast<Eigen::Index>(spectrum.size());
  Eigen::VectorXd data(n), chi2(n), re(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto chi = susceptibility(mode, 2.0 * pi * spectrum.freqs[static_cast<std::size_t>(i)]);
    data[i] = spectrum.psd[static_cast<std::size_t>(i)];
    chi2[i] = std::norm(chi);
    re[i] = chi.real();
  }

  // A resonance must stand out of the background for the terms to separate.
  std::vector<double> sorted(spectrum.psd);
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  if (sorted.back() < 2.0 * median)
    throw FitError("degenerate fit: spectrum is flat, no resonance above the background");

  const double s_imp0 = sorted[sorted.size() / 10];
  Eigen::Index ipk = 0;
  chi2.maxCoeff(&ipk);
  const double s_im0 = std::max((data[ipk] - s_imp0) / chi2[ipk] - S_tau_th, 0.1 * S_tau_th);

  const Eigen::Index np = fix_C_zero ? 2 : 3;
  Eigen::MatrixXd basis(n, np);
  basis.col(0).setOnes();
  basis.col(1) = chi2;
  if (!fix_C_zero) basis.col(2) = re;
  Eigen::VectorXd p0(np);
  p0[0] = s_imp0;
  p0[1] = s_im0;
  if (!fix_C_zero) p0[2] = 0.0;
  std::vector<bool> nonneg{true, true};
  if (!fix_C_zero) nonneg.push_back(false);

  const Eigen::VectorXd offset = S_tau_th * chi2;
  const auto fit = detail::fit_weighted_linear(data, basis, offset, p0, nonneg);

  CorrelationFit out;
  out.C_fixed = fix_C_zero;
  out.S_imp = fit.params[0];
  out.S_tau_IM = fit.params[1];
  out.S_imp_stderr = std::sqrt(std::max(fit.covariance(0, 0), 0.0));
  out.S_tau_IM_stderr = std::sqrt(std::max(fit.covariance(1, 1), 0.0));
  if (!fix_C_zero) {
    out.C = fit.params[2];
    out.C_stderr = std::sqrt(std::max(fit.covariance(2, 2), 0.0));
  }
  out.residual = fit.reduced_chi2;
  out.cost = fit.cost;
  if (!std::isfinite(out.residual)) throw FitError("correlation fit residual is not finite");
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Multiplies each model value by a Gamma(K, 1/K) variate, the distribution of
/// a K-average periodogram of Gaussian noise.
inline RawSpectrum apply_periodogram_noise(std::span<const double> freqs,
                                           std::span<const double> model, unsigned averages,
                                           std::uint64_t seed) {
  detail::require(averages >= 1, "need at least one average");
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gam(static_cast<double>(averages), 1.0 / averages);
  RawSpectrum out;
  out.freqs.assign(freqs.begin(), freqs.end());
  out.psd.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) out.psd[i] = model[i] * gam(rng);
  return out;
}

inline RawSpectrum synthetic_thermal_spectrum(const TorsionMode& mode, double g, double floor,
                                              std::span<const double> freqs_hz, unsigned averages,
                                              std::uint64_t seed,
                                              const PhysicalConstants& k = codata) {
  mode.validate();
  detail::require(g > 0 && floor >= 0, "gain must be positive and floor >= 0");
  const double s_th = thermal_torque_psd(mode, k);
  std::vector<double> model(freqs_hz.size());
  for (std::size_t i = 0; i < freqs_hz.size(); ++i)
    model[i] = g * g * s_th * std::norm(susceptibility(mode, 2.0 * pi * freqs_hz[i])) + floor;
  return apply_periodogram_noise(freqs_hz, model, averages, seed);
}

inline RawSpectrum synthetic_correlated_spectrum(const TorsionMode& mode, double S_imp,
                                                 double S_tau_IM, double C, double S_tau_th,
                                                 std::span<const double> freqs_hz,
                                                 unsigned averages, std::uint64_t seed) {
  mode.validate();
  std::vector<double> model(freqs_hz.size());
  for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
    const auto chi = susceptibility(mode, 2.0 * pi * freqs_hz[i]);
    model[i] = S_imp + (S_tau_IM + S_tau_th) * std::norm(chi) + C * chi.real();
    if (!(model[i] > 0)) throw ParameterError("correlation too strong: model PSD is not positive");
  }
  return apply_periodogram_noise(freqs_hz, model, averages, seed);
}

/// Detector-translation scan V = (g / 2L) dx + white voltage noise.
inline std::vector<double> synthetic_lateral_scan(double g, double lever_arm,
                                                  std::span<const double> dx, double noise_v,
                                                  std::uint64_t seed) {
  detail::require(noise_v >= 0, "voltage noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dx.size());
  const double slope = g / (2.0 * lever_arm);
  for (std::size_t i = 0; i < dx.size(); ++i) v[i] = slope * dx[i] + noise_v * gauss(rng);
  return v;
}

}  // namespace optolever
