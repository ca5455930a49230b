#include <gtest/gtest.h>

#include <optolever/mc_photon.hpp>
#include <optolever/spectra.hpp>

using namespace optolever;

namespace {

PhotonStreamConfig stream(std::uint64_t seed = 3) {
  PhotonStreamConfig c;
  c.dt = 1e-9;
  c.duration = 16384e-9;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(MonteCarlo, BackactionMatchesRadiationPressurePsd) {
  const auto c = stream();
  const auto est = estimate_backaction_psd(c, 4, 2);
  const double expected = backaction_torque_psd(c.beam);
  EXPECT_NEAR(est.S_tau / expected, 1.0, 0.05);
  EXPECT_LT(std::abs(est.S_tau - expected), 4 * est.S_tau_stderr);
}

TEST(MonteCarlo, CentredBeamHasNoMeanTorque) {
  const auto est = estimate_backaction_psd(stream(11), 4, 1);
  EXPECT_LT(std::abs(est.mean_torque), 4 * est.mean_stderr);
}

TEST(MonteCarlo, OffsetBeamExertsStaticTorque) {
  auto c = stream();
  c.x_off = 10e-6;
  const auto est = estimate_backaction_psd(c);
  const double expected = 2 * c.beam.power * c.x_off / codata.c;
  EXPECT_NEAR(est.mean_torque / expected, 1.0, 0.01);
}

TEST(MonteCarlo, PhotonCountMatchesFlux) {
  const auto c = stream();
  const auto s = simulate_torque_series(c);
  EXPECT_EQ(s.torque.size(), 16384u);
  const double expected = c.photon_flux() * c.duration;
  EXPECT_NEAR(static_cast<double>(s.n_photons) / expected, 1.0, 5 / std::sqrt(expected));
}

TEST(MonteCarlo, SeedDeterminesSeries) {
  const auto a = simulate_torque_series(stream(5));
  const auto b = simulate_torque_series(stream(5));
  const auto c = simulate_torque_series(stream(6));
  EXPECT_EQ(a.torque, b.torque);
  EXPECT_NE(a.torque, c.torque);
  const auto r1 = estimate_backaction_psd(stream(5), 3, 1);
  const auto r3 = estimate_backaction_psd(stream(5), 3, 3);
  EXPECT_EQ(r1.S_tau, r3.S_tau);
}

TEST(MonteCarlo, RejectsSparseOrShortStreams) {
  auto c = stream();
  c.beam.power = 1e-9;
  EXPECT_THROW(simulate_torque_series(c), ParameterError);
  c = stream();
  c.duration = 512e-9;
  EXPECT_THROW(simulate_torque_series(c), ParameterError);
  EXPECT_THROW(estimate_backaction_psd(stream(), 0, 1), ParameterError);
}
