#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace optolever;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("optolever_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args, const std::string& out_sub = "out") {
    args.insert(args.begin(), {"optolever", "--out", (dir_ / out_sub).string()});
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  json read_json(const std::string& name, const std::string& out_sub = "out") const {
    std::ifstream f(dir_ / out_sub / name);
    return json::parse(f);
  }

  std::string read_text(const fs::path& p) const {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  std::string write_file(const std::string& name, const std::string& text) const {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const std::string curved = "[ribbon]\nAp = 16.666666666666668\n";

}  // namespace

TEST_F(CliTest, BudgetReportsQuantumProduct) {
  ASSERT_EQ(run({"budget"}), 0) << err_.str();
  const auto j = read_json("budget.json");
  const double hbar = codata.hbar;
  EXPECT_NEAR(j["budget"]["product"].get<double>() / (hbar * hbar), pi / 2, 1e-9);
  EXPECT_NEAR(j["budget"]["n_imp"].get<double>(), 0.0276, 0.0005);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "spectrum.csv"));
  EXPECT_EQ(read_json("config.json")["config_hash"], j["config_hash"]);
  const auto csv = read_text(dir_ / "out" / "spectrum.csv");
  EXPECT_EQ(csv.rfind("# config_hash=" + j["config_hash"].get<std::string>() + "\n", 0), 0u);
}

TEST_F(CliTest, ZeroPowerIsAConfigError) {
  EXPECT_EQ(run({"--set", "beam.P=0", "budget"}), 2);
  EXPECT_NE(err_.str().find("power must be positive"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UnknownKeyAndMissingFileAreConfigErrors) {
  EXPECT_EQ(run({"--set", "beam.power=1", "budget"}), 2);
  EXPECT_EQ(run({"--config", (dir_ / "missing.ini").string(), "budget"}), 2);
  EXPECT_EQ(run({"no-such-command"}), 2);
  const auto bad = write_file("bad.ini", "[beam]\nwaist = 1\n");
  EXPECT_EQ(run({"--config", bad, "budget"}), 2);
}

TEST_F(CliTest, WaistSweepOnCurvedRibbon) {
  const auto cfg = write_file("c.ini", curved);
  ASSERT_EQ(run({"--config", cfg, "--threads", "2", "sweep", "waist"}), 0) << err_.str();
  const double w = read_json("sweep_summary.json")["minimum"]["param"].get<double>();
  EXPECT_NEAR(w, 60e-6, 10e-6);
}

TEST_F(CliTest, EmptySweepRangeRejected) {
  EXPECT_EQ(run({"--set", "sweep.start=100e-6", "--set", "sweep.stop=50e-6", "sweep", "waist"}), 2);
  EXPECT_EQ(run({"--set", "sweep.points=0", "sweep", "power"}), 2);
  EXPECT_EQ(run({"sweep", "length"}), 2);
}

TEST_F(CliTest, FocusSweepCompensatesCurvature) {
  const auto cfg = write_file("c.ini", curved + "[sweep]\npoints = 31\n");
  ASSERT_EQ(run({"--config", cfg, "--threads", "2", "sweep", "focus"}), 0) << err_.str();
  const double z = read_json("sweep_summary.json")["optimal_z"].get<double>();
  EXPECT_GE(-z, 12e-3);
  EXPECT_LE(-z, 16e-3);
}

TEST_F(CliTest, PowerSweepSlope) {
  ASSERT_EQ(run({"sweep", "power"}), 0) << err_.str();
  EXPECT_NEAR(read_json("sweep_summary.json")["log_slope"].get<double>(), -1.0, 1e-9);
}

TEST_F(CliTest, CoolingFloor) {
  ASSERT_EQ(run({"--set", "cool.n_imp=0.06", "cool"}), 0) << err_.str();
  EXPECT_NEAR(read_json("cool.json")["n_min"].get<double>(), 5.3e3, 0.1e3);
  EXPECT_EQ(run({"--set", "cool.n_imp=0", "cool"}), 2);
}

TEST_F(CliTest, CalibrateAndFitFromFiles) {
  const TorsionMode m = config::RunConfig{}.mode();
  const double f = m.omega_m / (2 * pi), lw = m.gamma_m / (2 * pi);
  const auto freqs = linspace(f - 20 * lw, f + 20 * lw, 801);
  const double g = 2e6;
  const double peak = g * g * thermal_torque_psd(m) * std::norm(susceptibility(m, m.omega_m));
  const auto raw = synthetic_thermal_spectrum(m, g, 0.01 * peak, freqs, 400, 3);
  std::ostringstream csv;
  io::write_csv(csv, io::raw_spectrum_table(raw), "x");
  const auto in = write_file("raw.csv", csv.str());
  ASSERT_EQ(run({"calibrate", "--input", in}), 0) << err_.str();
  EXPECT_NEAR(read_json("calibration.json")["g"].get<double>() / g, 1.0, 0.02);

  const double s_th = thermal_torque_psd(m), chi = std::abs(susceptibility(m, m.omega_m));
  const auto spec = synthetic_correlated_spectrum(m, 0.035 * s_th * chi * chi, 2.5 * s_th,
                                                  0.3 * s_th * chi, s_th, freqs, 400, 4);
  std::ostringstream csv2;
  io::write_csv(csv2, io::raw_spectrum_table(spec, "psd_rad2_hz"), "x");
  const auto in2 = write_file("cal.csv", csv2.str());
  ASSERT_EQ(run({"fit-correlations", "--input", in2}), 0) << err_.str();
  const auto j = read_json("correlations.json");
  EXPECT_NEAR(j["S_tau_IM_over_S_th"].get<double>(), 2.5, 0.3);
  EXPECT_GT(j["C"].get<double>(), 0.0);

  EXPECT_EQ(run({"calibrate", "--input", write_file("junk.csv", "nope\n")}), 2);
  EXPECT_EQ(run({"calibrate"}), 2);
}

TEST_F(CliTest, SameSeedGivesByteIdenticalOutput) {
  const std::vector<std::string> args{"--seed", "5", "--set", "mc.replicas=2", "mc-backaction"};
  ASSERT_EQ(run(args, "a"), 0) << err_.str();
  ASSERT_EQ(run(args, "b"), 0) << err_.str();
  EXPECT_EQ(read_text(dir_ / "a" / "mc.json"), read_text(dir_ / "b" / "mc.json"));

  const std::vector<std::string> sim{"--seed", "5", "--set", "sim.Q=100", "--set", "sim.duration=0.05",
                                     "--set", "sim.series=true", "simulate"};
  ASSERT_EQ(run(sim, "c"), 0) << err_.str();
  ASSERT_EQ(run(sim, "d"), 0) << err_.str();
  for (const char* f : {"sim.json", "series.csv", "psd.csv"})
    EXPECT_EQ(read_text(dir_ / "c" / f), read_text(dir_ / "d" / f)) << f;
}

TEST_F(CliTest, JsonFormatTables) {
  ASSERT_EQ(run({"--format", "json", "sweep", "power"}), 0) << err_.str();
  const auto j = read_json("sweep.json");
  EXPECT_EQ(j["columns"][0], "param");
  EXPECT_EQ(j["rows"].size(), 61u);
}

TEST_F(CliTest, DiffractionCommand) {
  ASSERT_EQ(run({"diffraction"}), 0) << err_.str();
  EXPECT_GT(read_json("diffraction.json").size(), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "farfield.csv"));
}

// Tampering with a physical constant must make the acceptance gate fail.
TEST(CliVerify, DoubledPlanckConstantFailsUncertaintyCriterion) {
  PhysicalConstants bad = codata;
  bad.hbar *= 2;
  acceptance::Options o;
  o.constants = bad;
  const auto r = acceptance::uncertainty_product(o);
  EXPECT_FALSE(r.passed()) << acceptance::summary_line(r);
  EXPECT_TRUE(acceptance::uncertainty_product(acceptance::Options{}).passed());
  EXPECT_EQ(cli::exit_code({r}), 1);
}
