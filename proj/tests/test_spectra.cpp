#include <gtest/gtest.h>

#include <random>

#include <optolever/spectra.hpp>

#include "support.hpp"

using namespace optolever;
using testing_support::quoted_mode;

TEST(Spectra, ImprecisionAtTenMilliwatts) {
  ProbeBeam b;
  b.power = 10e-3;
  EXPECT_NEAR(imprecision_psd(b, Detector{}) / 9.3e-23, 1.0, 0.01);
}

TEST(Spectra, BackactionAtOneMilliwatt) {
  EXPECT_NEAR(backaction_torque_psd(ProbeBeam{}) / 1.87e-47, 1.0, 0.01);
}

TEST(Spectra, BackactionGrowsWithSpotArea) {
  ProbeBeam b;
  const double s0 = backaction_torque_psd(b);
  b.focus_offset = -b.rayleigh_range();
  EXPECT_NEAR(backaction_torque_psd(b) / s0, 2.0, 1e-12);
}

TEST(Spectra, UncertaintyProductOfIdealLever) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    ProbeBeam b;
    b.power = std::pow(10.0, -6 + 5 * u(rng));
    b.waist = 10e-6 + 190e-6 * u(rng);
    b.wavelength = 400e-9 + 1200e-9 * u(rng);
    const double product = imprecision_psd(b, Detector{}) * backaction_torque_psd(b);
    EXPECT_NEAR(product / (codata.hbar * codata.hbar), pi / 2, 1e-9);
  }
}

TEST(Spectra, ProductRespectsHeisenbergForAnyEfficiency) {
  for (double eta : {0.1, 0.5, 0.9, 1.0}) {
    Detector d;
    d.eta_d = eta;
    const double product = imprecision_psd(ProbeBeam{}, d) * backaction_torque_psd(ProbeBeam{});
    EXPECT_GE(product, codata.hbar * codata.hbar);
    EXPECT_NEAR(product / (codata.hbar * codata.hbar), pi / (2 * eta), 1e-9);
  }
}

TEST(Spectra, SusceptibilitySignConvention) {
  const auto m = quoted_mode();
  EXPECT_GT(susceptibility(m, m.omega_m * 1.01).real(), 0.0);
  EXPECT_LT(susceptibility(m, m.omega_m * 0.99).real(), 0.0);
  EXPECT_GT(susceptibility(m, m.omega_m).imag(), 0.0);
  EXPECT_NEAR(std::abs(susceptibility(m, m.omega_m)), m.quality() / (m.inertia * m.omega_m * m.omega_m),
              1e-12 * std::abs(susceptibility(m, m.omega_m)));
}

TEST(Spectra, TotalIsSumOfComponents) {
  const auto m = quoted_mode();
  const auto f = linspace(m.omega_m - 50 * m.gamma_m, m.omega_m + 50 * m.gamma_m, 501);
  const auto s = total_spectrum(ProbeBeam{}, Detector{}, m, f, Correlation{1e-40, 1e-30});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sum = s.imprecision[i] + s.backaction[i] + s.thermal[i] + s.zero_point[i] +
                       s.correlation[i];
    EXPECT_NEAR(s.total[i], sum, 1e-12 * std::abs(sum));
    EXPECT_GT(s.total[i], 0.0);
  }
}

TEST(Spectra, CorrelationTermIsOddAboutResonance) {
  const auto m = quoted_mode();
  const double d = 3 * m.gamma_m;
  const std::vector<double> f{m.omega_m - d, m.omega_m, m.omega_m + d};
  const auto s = total_spectrum(ProbeBeam{}, Detector{}, m, f, Correlation{0, 1e-30});
  EXPECT_LT(s.correlation[0], 0.0);
  EXPECT_GT(s.correlation[2], 0.0);
  EXPECT_NEAR(s.correlation[0] / s.correlation[2], -1.0, 1e-6);
}

TEST(Spectra, ZeroPointLineshapePeaksAtQuotedValue) {
  const auto m = quoted_mode();
  EXPECT_NEAR(zero_point_psd(m, m.omega_m) / zero_point_psd_peak(m), 1.0, 1e-12);
}

TEST(Spectra, BudgetFields) {
  const auto m = quoted_mode();
  const auto b = budget(ProbeBeam{}, Detector{}, m);
  EXPECT_NEAR(b.n_imp, b.S_imp / (2 * b.S_zp_peak), 1e-15);
  EXPECT_NEAR(b.eta_total, 2 / pi, 1e-15);
  EXPECT_NEAR(b.product / (codata.hbar * codata.hbar), pi / 2, 1e-9);
  NoiseBudget q;
  q.n_imp = 0.004;
  EXPECT_NEAR(q.db_below_sql(), 17.96, 0.01);
  q.n_imp = 0.25;
  EXPECT_NEAR(q.db_below_sql(), 0.0, 1e-12);
}

TEST(Spectra, StandardQuantumLimit) {
  const auto m = quoted_mode();
  const auto sql = sql_optimal_power(ProbeBeam{}, Detector{}, m);
  const double eta = 2 / pi;
  EXPECT_NEAR(sql.added_min / (zero_point_psd_peak(m) / std::sqrt(eta)), 1.0, 1e-9);
  // Brute-force power scan: nothing beats the analytic optimum.
  double best = std::numeric_limits<double>::infinity(), p_best = 0;
  for (double p : logspace(1e-8, 1e-1, 20001)) {
    ProbeBeam b;
    b.power = p;
    const double a = added_noise_on_resonance(b, Detector{}, m);
    if (a < best) {
      best = a;
      p_best = p;
    }
  }
  EXPECT_GE(best, sql.added_min * (1 - 1e-12));
  EXPECT_NEAR(best / sql.added_min, 1.0, 1e-5);
  EXPECT_NEAR(p_best / sql.P_opt, 1.0, 2e-3);
}

TEST(Spectra, ImprecisionFallsInverselyWithPower) {
  std::vector<double> p = logspace(1e-6, 1.0, 61), s;
  for (double v : p) {
    ProbeBeam b;
    b.power = v;
    s.push_back(imprecision_psd(b, Detector{}));
  }
  EXPECT_NEAR(testing_support::log_log_slope(p, s), -1.0, 1e-9);
}

TEST(Spectra, GridErrors) {
  const auto m = quoted_mode();
  std::vector<double> empty;
  EXPECT_THROW(total_spectrum(ProbeBeam{}, Detector{}, m, empty), ParameterError);
  std::vector<double> bad{2.0, 1.0};
  EXPECT_THROW(total_spectrum(ProbeBeam{}, Detector{}, m, bad), ParameterError);
  ProbeBeam off;
  off.focus_offset = -1e-3;
  EXPECT_THROW(sql_optimal_power(off, Detector{}, m), ParameterError);
}
