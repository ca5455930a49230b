#include <gtest/gtest.h>

#include <optolever/calib.hpp>

#include "support.hpp"

using namespace optolever;
using testing_support::quoted_mode;

namespace {

std::vector<double> grid(const TorsionMode& m, double halfspan_lw = 20, std::size_t n = 2001) {
  const double f = m.omega_m / (2 * pi), lw = m.gamma_m / (2 * pi);
  return linspace(f - halfspan_lw * lw, f + halfspan_lw * lw, n);
}

double thermal_peak(const TorsionMode& m, double g) {
  return g * g * thermal_torque_psd(m) * std::norm(susceptibility(m, m.omega_m));
}

}  // namespace

TEST(Calibration, BootstrapRecoversGain) {
  const auto m = quoted_mode();
  const double g = 2e6;
  const auto raw = synthetic_thermal_spectrum(m, g, 0.01 * thermal_peak(m, g), grid(m), 400, 1);
  const auto c = bootstrap_calibration(raw, m);
  EXPECT_NEAR(c.g / g, 1.0, 0.01);
  EXPECT_LT(std::abs(c.g - g), 4 * c.g_stderr);
  // Relative residuals of a K-average periodogram have variance 1/K.
  EXPECT_NEAR(c.residual * 400, 1.0, 0.2);
}

TEST(Calibration, NoiselessSpectrumIsExact) {
  const auto m = quoted_mode();
  const auto f = grid(m);
  std::vector<double> model;
  for (double v : f) model.push_back(4e12 * thermal_torque_psd(m) * std::norm(susceptibility(m, 2 * pi * v)) + 1e-9);
  const RawSpectrum raw{f, model};
  const auto c = bootstrap_calibration(raw, m);
  EXPECT_NEAR(c.g / 2e6, 1.0, 1e-8);
  EXPECT_NEAR(c.floor / 1e-9, 1.0, 1e-6);
}

TEST(Calibration, ZeroFloorIsConsistentWithZero) {
  const auto m = quoted_mode();
  const auto raw = synthetic_thermal_spectrum(m, 1e6, 0.0, grid(m), 400, 3);
  const auto c = bootstrap_calibration(raw, m);
  EXPECT_LE(std::abs(c.floor), 3 * c.floor_stderr + 1e-6 * thermal_peak(m, 1e6));
  EXPECT_NEAR(c.g / 1e6, 1.0, 0.01);
}

TEST(Calibration, GainScalesLinearly) {
  const auto m = quoted_mode();
  const auto f = grid(m);
  const auto a = synthetic_thermal_spectrum(m, 1e6, 0.01 * thermal_peak(m, 1e6), f, 400, 5);
  RawSpectrum b = a;
  for (auto& p : b.psd) p *= 4;
  EXPECT_NEAR(bootstrap_calibration(b, m).g / bootstrap_calibration(a, m).g, 2.0, 1e-6);
}

TEST(Calibration, GainIndependentOfFloor) {
  const auto m = quoted_mode();
  const double g = 1e6;
  for (double floor_frac : {1e-3, 1e-2, 0.1}) {
    const auto raw = synthetic_thermal_spectrum(m, g, floor_frac * thermal_peak(m, g), grid(m), 400, 8);
    EXPECT_NEAR(bootstrap_calibration(raw, m).g / g, 1.0, 0.02) << "floor " << floor_frac;
  }
}

TEST(Calibration, StandardErrorsCoverTruth) {
  const auto m = quoted_mode();
  const double g = 1e6;
  const auto f = grid(m, 20, 401);
  int covered = 0;
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    const auto raw = synthetic_thermal_spectrum(m, g, 0.05 * thermal_peak(m, g), f, 50, seed);
    const auto c = bootstrap_calibration(raw, m);
    covered += std::abs(c.g - g) <= 2 * c.g_stderr;
  }
  EXPECT_GE(covered, 90);  // two-sigma coverage of 95% nominal over 100 trials
}

TEST(Calibration, RejectsNarrowOrWrongData) {
  const auto m = quoted_mode();
  const auto narrow = synthetic_thermal_spectrum(m, 1e6, 1e-6, grid(m, 2, 101), 100, 1);
  EXPECT_THROW(bootstrap_calibration(narrow, m), DataError);
  // A ramp has no Lorentzian to fit.
  std::vector<double> slope;
  for (std::size_t i = 0; i < 2001; ++i) slope.push_back(1.0 + 5.0 * i);
  RawSpectrum ramp{grid(m), slope};
  EXPECT_THROW(bootstrap_calibration(ramp, m), FitError);
  RawSpectrum bad{{1, 2, 3}, {1, 1, 1}};
  EXPECT_THROW(bootstrap_calibration(bad, m), DataError);
}

TEST(Calibration, LateralGain) {
  EXPECT_NEAR(lateral_calibration(1e3, 0.5), 1000.0, 1e-9);  // 1 V/mm at 0.5 m
  EXPECT_THROW(lateral_calibration(0.0, 0.5), ParameterError);
  const auto dx = linspace(-50e-6, 50e-6, 21);
  const auto v = synthetic_lateral_scan(1000.0, 0.5, dx, 0.0, 1);
  const auto fit = fit_lateral_slope(dx, v);
  EXPECT_NEAR(lateral_calibration(fit.slope, 0.5), 1000.0, 1e-6);
  EXPECT_NEAR(fit.intercept, 0.0, 1e-12);
  std::vector<double> two{1.0, 2.0};
  EXPECT_THROW(fit_lateral_slope(two, two), DataError);
}

TEST(Calibration, LateralAndThermalAgree) {
  const auto m = quoted_mode();
  const double g = 2e6, lever = 0.5;
  const auto raw = synthetic_thermal_spectrum(m, g, 0.01 * thermal_peak(m, g), grid(m), 400, 21);
  const auto boot = bootstrap_calibration(raw, m);
  const auto dx = linspace(-50e-6, 50e-6, 21);
  const auto v = synthetic_lateral_scan(g, lever, dx, 0.05 * g / (2 * lever) * 50e-6, 22);
  const auto line = fit_lateral_slope(dx, v);
  const double gap = std::abs(lateral_calibration(line.slope, lever) - boot.g) /
                     std::hypot(2 * lever * line.slope_stderr, boot.g_stderr);
  EXPECT_LE(gap, 3.0);
}

class CorrelationFitTest : public ::testing::Test {
 protected:
  TorsionMode m = quoted_mode();
  double s_th = thermal_torque_psd(m);
  double chi_pk = std::abs(susceptibility(m, m.omega_m));
  double s_im = 2.5 * s_th;
  double s_imp = 0.01 * (s_im + s_th) * chi_pk * chi_pk;
};

TEST_F(CorrelationFitTest, RecoversIntensityNoiseAndCorrelation) {
  const double c_true = 0.3 * s_th * chi_pk;
  const auto spec = synthetic_correlated_spectrum(m, s_imp, s_im, c_true, s_th, grid(m), 400, 4);
  const auto fit = fit_correlations(spec, m, s_th);
  EXPECT_NEAR(fit.S_tau_IM / s_th, 2.5, 0.25);
  EXPECT_NEAR(fit.S_imp / s_imp, 1.0, 0.05);
  EXPECT_NEAR(fit.C / c_true, 1.0, 0.1);
  EXPECT_GT(fit.C, 3 * fit.C_stderr);
}

TEST_F(CorrelationFitTest, SignFlipsWithCorrelation) {
  const double c_true = -0.3 * s_th * chi_pk;
  const auto spec = synthetic_correlated_spectrum(m, s_imp, s_im, c_true, s_th, grid(m), 400, 5);
  const auto fit = fit_correlations(spec, m, s_th);
  EXPECT_LT(fit.C, -3 * fit.C_stderr);
}

TEST_F(CorrelationFitTest, UncorrelatedDataFitsZero) {
  const auto spec = synthetic_correlated_spectrum(m, s_imp, s_im, 0.0, s_th, grid(m), 400, 6);
  const auto fit = fit_correlations(spec, m, s_th);
  EXPECT_LT(std::abs(fit.C), 3 * fit.C_stderr);
  const auto fixed = fit_correlations(spec, m, s_th, true);
  EXPECT_TRUE(fixed.C_fixed);
  EXPECT_EQ(fixed.C, 0.0);
  EXPECT_NEAR(fixed.S_tau_IM / s_th, 2.5, 0.25);
}

TEST_F(CorrelationFitTest, FreeCorrelationNeverFitsWorse) {
  for (double frac : {0.0, 0.1, -0.3}) {
    const auto spec = synthetic_correlated_spectrum(m, s_imp, s_im, frac * s_th * chi_pk, s_th,
                                                    grid(m), 400, 7);
    EXPECT_GE(fit_correlations(spec, m, s_th, true).cost,
              fit_correlations(spec, m, s_th, false).cost * (1 - 1e-9));
  }
}

TEST_F(CorrelationFitTest, FlatSpectrumIsDegenerate) {
  const auto f = grid(m);
  RawSpectrum flat{f, std::vector<double>(f.size(), s_imp)};
  EXPECT_THROW(fit_correlations(flat, m, s_th), FitError);
  EXPECT_THROW(fit_correlations(flat, m, -1.0), ParameterError);
}

TEST_F(CorrelationFitTest, OverlyStrongCorrelationRejected) {
  EXPECT_THROW(synthetic_correlated_spectrum(m, s_imp, 0, 100 * s_th * chi_pk, s_th, grid(m), 1, 1),
               ParameterError);
}
