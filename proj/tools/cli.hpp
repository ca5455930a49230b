#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <optolever/acceptance.hpp>
#include <optolever/calib.hpp>
#include <optolever/config.hpp>
#include <optolever/diffraction.hpp>
#include <optolever/feedback.hpp>
#include <optolever/io.hpp>
#include <optolever/mc_photon.hpp>
#include <optolever/spectra.hpp>
#include <optolever/timesim.hpp>

namespace optolever::cli {

enum ExitCode : int { ok = 0, acceptance_failure = 1, config_error = 2, numerical_error = 3 };

using json = nlohmann::ordered_json;

/// Output sink rooted at the run directory. File names are fixed per command.
class Output {
 public:
  Output(const config::RunConfig& cfg, std::string command)
      : dir_(cfg.get("run", "out")), format_(cfg.get("run", "format")), hash_(cfg.hash()),
        command_(std::move(command)) {
    if (format_ != "csv" && format_ != "json")
      throw ConfigError("run.format must be csv or json, got '" + format_ + "'");
    std::filesystem::create_directories(dir_);
    json echo = cfg.echo();
    echo["command"] = command_;
    write_json("config.json", echo);
  }

  [[nodiscard]] const std::string& hash() const { return hash_; }

  void write_table(const std::string& stem, const io::Table& t) const {
    if (format_ == "json") {
      json j = io::to_json(t, hash_);
      write_json(stem + ".json", j);
    } else {
      std::ofstream f(path(stem + ".csv"));
      io::write_csv(f, t, hash_);
      check(f, stem + ".csv");
    }
  }

  void write_json(const std::string& name, json j) const {
    j["config_hash"] = hash_;
    std::ofstream f(path(name));
    f << j.dump(2) << '\n';
    check(f, name);
  }

  [[nodiscard]] json header() const {
    json j;
    j["command"] = command_;
    j["config_hash"] = hash_;
    return j;
  }

 private:
  [[nodiscard]] std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  static void check(const std::ofstream& f, const std::string& name) {
    if (!f) throw ConfigError("cannot write output file " + name);
  }

  std::filesystem::path dir_;
  std::string format_;
  std::string hash_;
  std::string command_;
};

inline json mode_json(const TorsionMode& m) {
  json j;
  j["f_m_hz"] = m.omega_m / (2.0 * pi);
  j["gamma_m"] = m.gamma_m;
  j["Q"] = m.quality();
  j["inertia"] = m.inertia;
  j["T"] = m.temperature;
  return j;
}

inline DiffractionScene scene_from(const config::RunConfig& cfg) {
  DiffractionScene s;
  s.geom = cfg.ribbon();
  s.beam = cfg.beam();
  s.eta_d = cfg.detector().eta_d;
  s.grid.panels = static_cast<int>(cfg.integer("diffraction", "panels"));
  s.grid.domain_halfwidth = cfg.number("diffraction", "domain_halfwidth");
  s.grid.farfield_extent = cfg.number("diffraction", "farfield_extent");
  s.grid.farfield_points = static_cast<int>(cfg.integer("diffraction", "farfield_points"));
  s.grid.rel_tol = cfg.number("diffraction", "rel_tol");
  s.validate();
  return s;
}

inline json sensitivity_json(const SensitivityResult& r) {
  json j;
  j["S_imp"] = r.S_imp;
  j["dDeltaP_dx"] = r.dDeltaP_dx;
  j["w_eff"] = r.w_eff;
  j["balance_x"] = r.balance_x;
  j["reflected_power"] = r.reflected_power;
  j["warnings"] = r.warnings;
  return j;
}

inline std::vector<double> frequency_grid(const config::RunConfig& cfg, const TorsionMode& m) {
  const double f_m = m.omega_m / (2.0 * pi);
  const double lw = m.gamma_m / (2.0 * pi);
  const double lo = cfg.optional_number("budget", "f_min").value_or(f_m - 50.0 * lw);
  const double hi = cfg.optional_number("budget", "f_max").value_or(f_m + 50.0 * lw);
  const auto n = cfg.integer("budget", "points");
  if (n < 2 || !(hi > lo) || lo < 0) throw ConfigError("budget frequency range is empty");
  auto f = linspace(2.0 * pi * lo, 2.0 * pi * hi, n);
  return f;
}

inline int cmd_budget(const config::RunConfig& cfg, std::ostream& out) {
  const auto mode = cfg.mode();
  const auto beam = cfg.beam();
  const auto det = cfg.detector();
  const auto b = budget(beam, det, mode);
  Correlation corr{cfg.number("budget", "S_tau_IM"), cfg.number("budget", "C")};
  const auto freqs = frequency_grid(cfg, mode);
  const auto spec = total_spectrum(beam, det, mode, freqs, corr);

  Output o(cfg, "budget");
  json j = o.header();
  j["mode"] = mode_json(mode);
  json& bj = j["budget"];
  bj["S_imp"] = b.S_imp;
  bj["S_tau_BA"] = b.S_tau_BA;
  bj["S_tau_th"] = b.S_tau_th;
  bj["S_zp_peak"] = b.S_zp_peak;
  bj["n_imp"] = b.n_imp;
  bj["n_th"] = b.n_th;
  bj["product"] = b.product;
  bj["eta_total"] = b.eta_total;
  bj["db_below_sql"] = b.db_below_sql();
  o.write_json("budget.json", j);
  o.write_table("spectrum", io::spectrum_table(spec));
  out << j.dump(2) << '\n';
  return ok;
}

inline int cmd_sweep(const config::RunConfig& cfg, std::ostream& out) {
  const std::string param = cfg.get("sweep", "param");
  struct Range {
    double start, stop;
    std::uint64_t points;
    bool log;
  };
  Range def{};
  if (param == "waist") def = {20e-6, 150e-6, 53, false};
  else if (param == "focus") def = {-30e-3, 0.0, 61, false};
  else if (param == "power") def = {1e-6, 1.0, 61, true};
  else throw ConfigError("sweep.param must be waist, focus or power, got '" + param + "'");
  Range r{cfg.optional_number("sweep", "start").value_or(def.start),
          cfg.optional_number("sweep", "stop").value_or(def.stop),
          cfg.is_set("sweep", "points") ? cfg.integer("sweep", "points") : def.points,
          cfg.is_set("sweep", "log") ? cfg.flag("sweep", "log") : def.log};
  if (r.points == 0 || r.stop < r.start || (r.points > 1 && r.stop == r.start))
    throw ConfigError("sweep range is empty");
  if (r.log && !(r.start > 0)) throw ConfigError("log sweep needs a positive start");
  const auto values = r.log ? logspace(r.start, r.stop, r.points) : linspace(r.start, r.stop, r.points);
  const auto threads = static_cast<unsigned>(cfg.integer("run", "threads"));

  io::Table t{{"param", "S_imp", "dDeltaP_dx", "w_eff"}, {}};
  json j;
  Output o(cfg, "sweep");
  j = o.header();
  j["param"] = param;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (param == "power") {
    const auto det = cfg.detector();
    ProbeBeam b = cfg.beam();
    for (double p : values) {
      b.power = p;
      // Gaussian spot of radius lambda L / (pi w0) on the detector.
      const double w_det = b.wavelength * b.lever_arm / (pi * b.waist);
      const double slope = 2.0 * p * std::sqrt(2.0 / pi) / w_det;
      t.add({p, imprecision_psd(b, det), slope, b.spot_size()});
    }
    if (t.rows.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double n = static_cast<double>(t.rows.size());
      for (const auto& row : t.rows) {
        const double x = std::log(row[0]), y = std::log(row[1]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      j["log_slope"] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
  } else {
    const auto scene = scene_from(cfg);
    std::vector<SweepPoint> pts;
    if (param == "waist") {
      pts = sweep_waist(scene, values, threads);
    } else {
      const auto fs = sweep_focus(scene, values, threads);
      pts = fs.points;
      j["optimal_z"] = fs.optimal_z;
      j["S_imp_opt"] = fs.S_imp_opt;
      j["backaction_penalty"] = fs.backaction_penalty;
    }
    json errors = json::array();
    for (const auto& p : pts) {
      if (p.result) t.add({p.param, p.result->S_imp, p.result->dDeltaP_dx, p.result->w_eff});
      else {
        t.add({p.param, nan, nan, nan});
        errors.push_back({{"param", p.param}, {"error", p.error}});
      }
    }
    j["errors"] = errors;
  }
  std::size_t best = t.rows.size();
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (std::isfinite(t.rows[i][1]) && (best == t.rows.size() || t.rows[i][1] < t.rows[best][1])) best = i;
  if (best == t.rows.size()) throw NumericalError("sweep produced no valid points");
  j["minimum"] = {{"param", t.rows[best][0]}, {"S_imp", t.rows[best][1]}};
  o.write_table("sweep", t);
  o.write_json("sweep_summary.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline int cmd_diffraction(const config::RunConfig& cfg, std::ostream& out) {
  const auto scene = scene_from(cfg);
  const auto r = spd_sensitivity(scene);
  const auto prof = far_field_profile(scene);
  Output o(cfg, "diffraction");
  json j = o.header();
  j["result"] = sensitivity_json(r);
  j["closed_form_S_imp"] = imprecision_psd(scene.beam, Detector{scene.eta_d, 0.0});
  j["farfield_integral"] = prof.integral();
  io::Table t{{"x_m", "line_power_w_per_m"}, {}};
  for (std::size_t i = 0; i < prof.x.size(); ++i) t.add({prof.x[i], prof.power[i]});
  o.write_json("diffraction.json", j);
  o.write_table("farfield", t);
  out << j.dump(2) << '\n';
  return ok;
}

inline int cmd_mc(const config::RunConfig& cfg, std::ostream& out) {
  PhotonStreamConfig pc;
  pc.beam = cfg.beam();
  pc.dt = cfg.number("mc", "dt");
  pc.duration = cfg.number("mc", "duration");
  pc.seed = cfg.integer("run", "seed");
  pc.x_off = pc.beam.lateral_offset;
  const auto replicas = static_cast<unsigned>(cfg.integer("mc", "replicas"));
  const auto threads = static_cast<unsigned>(cfg.integer("run", "threads"));
  const auto est = estimate_backaction_psd(pc, replicas, threads);
  const double eq = backaction_torque_psd(pc.beam);
  Output o(cfg, "mc-backaction");
  json j = o.header();
  j["seed"] = pc.seed;
  j["S_tau"] = est.S_tau;
  j["S_tau_stderr"] = est.S_tau_stderr;
  j["S_tau_closed_form"] = eq;
  j["ratio"] = est.S_tau / eq;
  j["n_photons"] = est.n_photons;
  j["mean_torque"] = est.mean_torque;
  j["mean_stderr"] = est.mean_stderr;
  o.write_json("mc.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline SimConfig sim_config(const config::RunConfig& cfg) {
  const auto dev = cfg.mode();
  SimConfig c;
  c.mode = TorsionMode::from_quality(dev.omega_m, cfg.number("sim", "Q"), dev.inertia, dev.temperature);
  c.dt = 2.0 * pi / dev.omega_m / cfg.number("sim", "samples_per_period");
  c.duration = cfg.number("sim", "duration");
  c.settle = cfg.number("sim", "settle");
  c.record_stride = cfg.integer("sim", "stride");
  c.seed = cfg.integer("run", "seed");
  c.theta0 = cfg.number("sim", "theta0");
  c.imprecision_psd = cfg.number("sim", "S_imp");
  c.drives.thermal = cfg.flag("sim", "thermal");
  if (cfg.flag("sim", "shot")) c.drives.shot = ShotDrive{cfg.beam()};
  if (cfg.number("sim", "S_tau_IM") > 0)
    c.drives.intensity = IntensityDrive{cfg.number("sim", "S_tau_IM"), cfg.number("sim", "x_off_IM"), 0.0};
  if (cfg.number("sim", "drive_power") > 0 && cfg.number("sim", "S_dx") > 0) {
    c.drives.position = PositionDrive{cfg.number("sim", "drive_power"), cfg.number("sim", "S_dx")};
    c.record.drive_x = true;
  }
  if (cfg.number("sim", "gamma_fb") > 0) c.drives.feedback = FeedbackDrive{cfg.number("sim", "gamma_fb")};
  if (cfg.number("sim", "tone_amplitude") != 0) {
    const double f = cfg.optional_number("sim", "tone_f").value_or(dev.omega_m / (2.0 * pi));
    c.drives.tone = ToneDrive{cfg.number("sim", "tone_amplitude"), 2.0 * pi * f, 0.0};
  }
  c.record.measured = c.imprecision_psd > 0 || c.drives.feedback.has_value();
  c.record.tau_drive = c.drives.shot || c.drives.intensity || c.drives.position || c.drives.tone;
  c.spectra_requested = cfg.flag("sim", "psd");
  return c;
}

inline int cmd_simulate(const config::RunConfig& cfg, std::ostream& out) {
  const auto c = sim_config(cfg);
  const auto s = integrate(c);
  Output o(cfg, "simulate");
  const auto& m = c.mode;
  json j = o.header();
  j["seed"] = c.seed;
  j["mode"] = mode_json(m);
  j["dt"] = c.dt;
  j["steps"] = c.steps();
  j["theta_variance"] = s.theta_variance;
  j["equipartition_ratio"] =
      s.theta_variance / (codata.k_B * m.temperature / (m.inertia * m.omega_m * m.omega_m));
  j["n_m"] = m.inertia * m.omega_m * s.theta_variance / codata.hbar - 0.5;

  if (cfg.flag("sim", "series")) {
    std::vector<std::string> cols{"t_s", "theta"};
    if (c.record.measured) cols.push_back("measured");
    if (c.record.tau_drive) cols.push_back("tau_drive");
    if (c.record.drive_x) cols.push_back("drive_x");
    io::Table t{cols, {}};
    for (std::size_t i = 0; i < s.theta.size(); ++i) {
      std::vector<double> row{static_cast<double>(i) * s.dt, s.theta[i]};
      if (c.record.measured) row.push_back(s.measured[i]);
      if (c.record.tau_drive) row.push_back(s.tau_drive[i]);
      if (c.record.drive_x) row.push_back(s.drive_x[i]);
      t.add(std::move(row));
    }
    o.write_table("series", t);
  }
  if (c.spectra_requested) {
    const auto skip = static_cast<std::size_t>(std::ceil(c.settle / s.dt));
    std::span<const double> th(s.theta);
    const auto psd = estimate_psd(th.subspan(std::min(skip, th.size())), s.dt);
    io::Table t{{"freq_hz", "psd"}, {}};
    for (std::size_t i = 0; i < psd.freqs.size(); ++i) t.add({psd.freqs[i], psd.psd[i]});
    o.write_table("psd", t);
    j["psd_segments"] = psd.segments;
    j["psd_method"] = psd.method;
    j["parseval_ratio"] = psd.parseval_ratio;
  }
  o.write_json("sim.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline int cmd_cool(const config::RunConfig& cfg, std::ostream& out) {
  const auto m = cfg.mode();
  FeedbackConfig fc{0.0, cfg.number("cool", "n_imp"), m};
  const auto opt = optimal_gain(fc);
  const double lo = cfg.number("cool", "ratio_min"), hi = cfg.number("cool", "ratio_max");
  const auto n = cfg.integer("cool", "points");
  if (n < 2 || !(lo >= 1.0) || !(hi > lo)) throw ConfigError("cooling range is empty");
  io::Table t{{"gamma_eff", "n_m"}, {}};
  for (double r : logspace(lo, hi, n)) t.add({r * m.gamma_m, phonon_number(fc, r * m.gamma_m)});

  Output o(cfg, "cool");
  json j = o.header();
  j["mode"] = mode_json(m);
  j["n_imp"] = fc.n_imp;
  j["n_th"] = thermal_occupation(m);
  j["gamma_eff_opt"] = opt.gamma_eff_opt;
  j["n_min"] = opt.n_min;
  j["weak_backaction"] = weak_backaction(m, cfg.beam());

  if (cfg.flag("cool", "verify")) {
    const auto desk = TorsionMode::from_quality(m.omega_m, cfg.number("cool", "verify_Q"), m.inertia, m.temperature);
    const double n_imp = thermal_occupation(desk) * cfg.number("cool", "verify_n_imp_fraction");
    json pts = json::array();
    for (double ratio : {4.0, 10.0, 40.0}) {
      SimConfig c;
      c.mode = desk;
      c.dt = 2.0 * pi / desk.omega_m / 100.0;
      c.duration = cfg.number("cool", "verify_duration");
      c.seed = cfg.integer("run", "seed") + static_cast<std::uint64_t>(ratio);
      c.imprecision_psd = imprecision_for_quanta(n_imp, desk);
      c.drives.feedback = FeedbackDrive{(ratio - 1.0) * desk.gamma_m};
      c.record_stride = 10;
      const auto run = cold_damp_run(c);
      pts.push_back({{"gamma_eff", run.gamma_eff},
                     {"n_m", run.n_m},
                     {"n_m_psd", run.n_m_psd},
                     {"n_m_formula", phonon_number(FeedbackConfig{(ratio - 1.0) * desk.gamma_m, n_imp, desk})}});
    }
    j["verification"] = {{"Q", desk.quality()}, {"n_imp", n_imp}, {"points", pts}};
  }
  o.write_table("cooling", t);
  o.write_json("cool.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline RawSpectrum read_spectrum(const std::string& path) {
  if (path.empty()) throw ConfigError("no input spectrum given");
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open input spectrum " + path);
  return io::read_raw_spectrum_csv(f);
}

inline int cmd_calibrate(const config::RunConfig& cfg, std::ostream& out) {
  const auto m = cfg.mode();
  const auto raw = read_spectrum(cfg.get("calibrate", "input"));
  const auto cal = bootstrap_calibration(raw, m);
  Output o(cfg, "calibrate");
  json j = o.header();
  j["g"] = cal.g;
  j["g_stderr"] = cal.g_stderr;
  j["floor"] = cal.floor;
  j["floor_stderr"] = cal.floor_stderr;
  j["covariance"] = {{cal.covariance(0, 0), cal.covariance(0, 1)}, {cal.covariance(1, 0), cal.covariance(1, 1)}};
  j["residual"] = cal.residual;
  if (const auto dvdx = cfg.optional_number("calibrate", "dV_dx")) {
    const double lever = cfg.beam().lever_arm;
    const double g_lat = lateral_calibration(*dvdx, lever);
    const double s_lat = 2.0 * lever * cfg.optional_number("calibrate", "dV_dx_stderr").value_or(0.0);
    const double sigma = std::hypot(s_lat, cal.g_stderr);
    j["lateral"] = {{"g", g_lat},
                    {"g_stderr", s_lat},
                    {"difference_sigma", sigma > 0 ? std::abs(g_lat - cal.g) / sigma : 0.0}};
  }
  o.write_json("calibration.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline int cmd_fit(const config::RunConfig& cfg, std::ostream& out) {
  const auto m = cfg.mode();
  const auto spec = read_spectrum(cfg.get("fit", "input"));
  const double s_th = cfg.optional_number("fit", "S_tau_th").value_or(thermal_torque_psd(m));
  const auto fit = fit_correlations(spec, m, s_th, cfg.flag("fit", "fix_C"));
  Output o(cfg, "fit-correlations");
  json j = o.header();
  j["S_imp"] = fit.S_imp;
  j["S_imp_stderr"] = fit.S_imp_stderr;
  j["S_tau_IM"] = fit.S_tau_IM;
  j["S_tau_IM_stderr"] = fit.S_tau_IM_stderr;
  j["C"] = fit.C;
  j["C_stderr"] = fit.C_stderr;
  j["C_fixed"] = fit.C_fixed;
  j["S_tau_th"] = s_th;
  j["S_tau_IM_over_S_th"] = fit.S_tau_IM / s_th;
  j["residual"] = fit.residual;
  o.write_json("correlations.json", j);
  out << j.dump(2) << '\n';
  return ok;
}

inline int exit_code(const std::vector<acceptance::CriterionResult>& results) {
  for (const auto& r : results)
    if (!r.passed()) return acceptance_failure;
  return ok;
}

inline int cmd_verify(const config::RunConfig& cfg, std::ostream& out,
                      const PhysicalConstants& constants = codata) {
  acceptance::Options opt;
  opt.constants = constants;
  opt.seed = cfg.integer("run", "seed");
  opt.threads = static_cast<unsigned>(cfg.integer("run", "threads"));
  const auto results = acceptance::run_all(opt);
  Output o(cfg, "verify");
  json j = o.header();
  json list = json::array();
  for (const auto& r : results) {
    out << acceptance::summary_line(r) << '\n';
    json c = {{"id", r.id}, {"title", r.title}, {"passed", r.passed()}};
    if (!r.error.empty()) c["error"] = r.error;
    json clauses = json::array();
    for (const auto& cl : r.clauses)
      clauses.push_back({{"name", cl.name}, {"measured", cl.measured}, {"target", cl.target}, {"passed", cl.passed}});
    c["clauses"] = clauses;
    list.push_back(c);
  }
  const int code = exit_code(results);
  j["criteria"] = list;
  j["passed"] = code == ok;
  o.write_json("verify.json", j);
  return code;
}

/// Parses arguments, runs one command and maps errors onto exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Optical-lever noise budget, diffraction, feedback and calibration toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir, format, input;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", threads, "Worker threads");
  app.add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--set", overrides, "Override a key: section.key=value");

  auto* budget = app.add_subcommand("budget", "Noise budget and spectrum");
  auto* sweep = app.add_subcommand("sweep", "Imprecision versus waist, focus or power");
  std::string sweep_param;
  sweep->add_option("param", sweep_param, "waist | focus | power");
  auto* diffraction = app.add_subcommand("diffraction", "Split-detector response of one scene");
  auto* mc = app.add_subcommand("mc-backaction", "Photon-counting backaction estimate");
  auto* simulate = app.add_subcommand("simulate", "Time-domain simulation");
  auto* cool = app.add_subcommand("cool", "Feedback cooling curve");
  auto* calibrate = app.add_subcommand("calibrate", "Thermal-noise calibration of a raw spectrum");
  calibrate->add_option("--input", input, "Spectrum CSV (freq_hz,psd_v2_hz)");
  auto* fit = app.add_subcommand("fit-correlations", "Correlated-backaction fit");
  fit->add_option("--input", input, "Calibrated spectrum CSV");
  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }

  try {
    config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::RunConfig::load(config_path);
    for (const auto& s : overrides) cfg.set_dotted(s);
    if (!out_dir.empty()) cfg.set("run", "out", out_dir);
    if (!format.empty()) cfg.set("run", "format", format);
    if (seed) cfg.set("run", "seed", std::to_string(*seed));
    if (threads) cfg.set("run", "threads", std::to_string(*threads));
    if (!sweep_param.empty()) cfg.set("sweep", "param", sweep_param);
    if (!input.empty()) cfg.set(calibrate->parsed() ? "calibrate" : "fit", "input", input);

    if (budget->parsed()) return cmd_budget(cfg, out);
    if (sweep->parsed()) return cmd_sweep(cfg, out);
    if (diffraction->parsed()) return cmd_diffraction(cfg, out);
    if (mc->parsed()) return cmd_mc(cfg, out);
    if (simulate->parsed()) return cmd_simulate(cfg, out);
    if (cool->parsed()) return cmd_cool(cfg, out);
    if (calibrate->parsed()) return cmd_calibrate(cfg, out);
    if (fit->parsed()) return cmd_fit(cfg, out);
    if (verify->parsed()) return cmd_verify(cfg, out);
    return config_error;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const DataError& e) {
    err << "input error: " << e.what() << '\n';
    return config_error;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return numerical_error;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  }
}

}  // namespace optolever::cli
