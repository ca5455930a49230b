#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "errors.hpp"
#include "io.hpp"

// Run configuration: an INI-style file of [section] blocks with `key = value`
// lines in SI units. Every key has a default; unknown sections or keys are
// rejected. Comments start with '#' or ';'.

namespace optolever::config {

struct KeySpec {
  std::string_view section;
  std::string_view key;
  std::string_view fallback;  // empty means "unset"
  std::string_view unit;
};

inline const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> keys = {
      {"ribbon", "L", "7e-3", "m"},
      {"ribbon", "w_r", "400e-6", "m"},
      {"ribbon", "h", "75e-9", "m"},
      {"ribbon", "sigma", "0.85e9", "Pa"},
      {"ribbon", "rho", "2700", "kg/m^3"},
      {"ribbon", "E", "250e9", "Pa"},
      {"ribbon", "Q0", "1000", "1"},
      {"ribbon", "A0", "0", "m"},
      {"ribbon", "Al", "0", "1"},
      {"ribbon", "Ap", "0", "1/m"},

      {"mode", "T", "295", "K"},
      {"mode", "Q_override", "3.3e7", "1"},
      {"mode", "f_override", "52.5e3", "Hz"},
      {"mode", "I_override", "", "kg m^2"},

      {"beam", "lambda", "850e-9", "m"},
      {"beam", "P", "1e-3", "W"},
      {"beam", "w0", "60e-6", "m"},
      {"beam", "z", "0", "m"},
      {"beam", "L_OL", "0.5", "m"},
      {"beam", "x_off", "0", "m"},

      {"detector", "eta_d", "1", "1"},
      {"detector", "S_extra", "0", "rad^2/Hz"},

      {"budget", "f_min", "", "Hz"},
      {"budget", "f_max", "", "Hz"},
      {"budget", "points", "2001", "1"},
      {"budget", "S_tau_IM", "0", "N^2 m^2/Hz"},
      {"budget", "C", "0", "rad N m/Hz"},

      {"sweep", "param", "waist", "waist|focus|power"},
      {"sweep", "start", "", "m or W"},
      {"sweep", "stop", "", "m or W"},
      {"sweep", "points", "", "1"},
      {"sweep", "log", "", "bool"},

      {"diffraction", "panels", "16", "1"},
      {"diffraction", "domain_halfwidth", "6", "w"},
      {"diffraction", "farfield_extent", "8", "spot radii"},
      {"diffraction", "farfield_points", "1025", "1"},
      {"diffraction", "rel_tol", "1e-9", "1"},

      {"mc", "dt", "1e-9", "s"},
      {"mc", "duration", "1e-4", "s"},
      {"mc", "replicas", "4", "1"},

      {"sim", "Q", "1e3", "1"},
      {"sim", "samples_per_period", "20", "1"},
      {"sim", "duration", "0.5", "s"},
      {"sim", "settle", "0", "s"},
      {"sim", "stride", "1", "1"},
      {"sim", "thermal", "true", "bool"},
      {"sim", "shot", "false", "bool"},
      {"sim", "S_tau_IM", "0", "N^2 m^2/Hz"},
      {"sim", "x_off_IM", "0", "m"},
      {"sim", "drive_power", "0", "W"},
      {"sim", "S_dx", "0", "m^2/Hz"},
      {"sim", "gamma_fb", "0", "rad/s"},
      {"sim", "S_imp", "0", "rad^2/Hz"},
      {"sim", "tone_amplitude", "0", "N m"},
      {"sim", "tone_f", "", "Hz"},
      {"sim", "theta0", "0", "rad"},
      {"sim", "psd", "true", "bool"},
      {"sim", "series", "false", "bool"},

      {"cool", "n_imp", "0.004", "1"},
      {"cool", "ratio_min", "1", "1"},
      {"cool", "ratio_max", "1e6", "1"},
      {"cool", "points", "61", "1"},
      {"cool", "verify", "false", "bool"},
      {"cool", "verify_Q", "1e3", "1"},
      {"cool", "verify_duration", "2", "s"},
      {"cool", "verify_n_imp_fraction", "0.01", "1"},

      {"calibrate", "input", "", "path"},
      {"calibrate", "dV_dx", "", "V/m"},
      {"calibrate", "dV_dx_stderr", "", "V/m"},

      {"fit", "input", "", "path"},
      {"fit", "S_tau_th", "", "N^2 m^2/Hz"},
      {"fit", "fix_C", "false", "bool"},

      {"run", "seed", "1", "1"},
      {"run", "threads", "1", "1"},
      {"run", "out", "out", "path"},
      {"run", "format", "csv", "csv|json"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : schema()) values_[std::string(k.section)][std::string(k.key)] = k.fallback;
  }

  static RunConfig parse(std::istream& is, std::string_view source = "<config>") {
    RunConfig cfg;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string where = std::string(source) + ":" + std::to_string(lineno) + ": ";
      std::string_view v = trim(line);
      if (v.empty() || v[0] == '#' || v[0] == ';') continue;
      if (v.front() == '[') {
        if (v.back() != ']') throw ConfigError(where + "unterminated section header");
        section = std::string(trim(v.substr(1, v.size() - 2)));
        if (!cfg.values_.contains(section)) throw ConfigError(where + "unknown section [" + section + "]");
        continue;
      }
      const auto eq = v.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
      if (section.empty()) throw ConfigError(where + "key outside of a section");
      std::string_view val = trim(v.substr(eq + 1));
      if (const auto hash = val.find_first_of("#;"); hash != std::string_view::npos)
        val = trim(val.substr(0, hash));
      try {
        cfg.set(section, std::string(trim(v.substr(0, eq))), std::string(val));
      } catch (const ConfigError& e) {
        throw ConfigError(where + e.what());
      }
    }
    return cfg;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    return parse(f, path.string());
  }

  void set(const std::string& section, const std::string& key, std::string value) {
    auto s = values_.find(section);
    if (s == values_.end()) throw ConfigError("unknown section [" + section + "]");
    auto k = s->second.find(key);
    if (k == s->second.end()) throw ConfigError("unknown key " + section + "." + key);
    k->second = std::move(value);
  }

  /// Applies "section.key=value".
  void set_dotted(std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
      throw ConfigError("override must look like section.key=value: " + std::string(assignment));
    set(std::string(trim(assignment.substr(0, dot))),
        std::string(trim(assignment.substr(dot + 1, eq - dot - 1))),
        std::string(trim(assignment.substr(eq + 1))));
  }

  [[nodiscard]] const std::string& get(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    if (s == values_.end() || !s->second.contains(key))
      throw ConfigError("unknown key " + section + "." + key);
    return s->second.at(key);
  }

  [[nodiscard]] bool is_set(const std::string& section, const std::string& key) const {
    return !get(section, key).empty();
  }

  [[nodiscard]] double number(const std::string& section, const std::string& key) const {
    const auto v = optional_number(section, key);
    if (!v) throw ConfigError(section + "." + key + " is required");
    return *v;
  }

  [[nodiscard]] std::optional<double> optional_number(const std::string& section,
                                                      const std::string& key) const {
    const std::string& s = get(section, key);
    if (s.empty()) return std::nullopt;
    double out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out))
      throw ConfigError(section + "." + key + ": not a finite number: '" + s + "'");
    return out;
  }

  [[nodiscard]] std::uint64_t integer(const std::string& section, const std::string& key) const {
    const std::string& s = get(section, key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError(section + "." + key + ": not a non-negative integer: '" + s + "'");
    return out;
  }

  [[nodiscard]] bool flag(const std::string& section, const std::string& key) const {
    const std::string& s = get(section, key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(section + "." + key + ": not a boolean: '" + s + "'");
  }

  /// Result-relevant keys as sorted "section.key=value" lines.
  [[nodiscard]] std::string canonical() const {
    std::string out;
    for (const auto& [sec, keys] : values_)
      for (const auto& [key, val] : keys) {
        if (sec == "run" && (key == "threads" || key == "out" || key == "format")) continue;
        out += sec + "." + key + "=" + val + "\n";
      }
    return out;
  }

  [[nodiscard]] std::string hash() const { return io::hex64(io::fnv1a64(canonical())); }

  [[nodiscard]] nlohmann::ordered_json echo() const {
    nlohmann::ordered_json j;
    for (const auto& [sec, keys] : values_)
      for (const auto& [key, val] : keys) {
        double d = 0;
        const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), d);
        if (!val.empty() && ec == std::errc() && ptr == val.data() + val.size())
          j["config"][sec][key] = d;
        else
          j["config"][sec][key] = val;
      }
    j["config_hash"] = hash();
    return j;
  }

  [[nodiscard]] RibbonGeometry ribbon() const {
    RibbonGeometry g;
    g.length = number("ribbon", "L");
    g.width = number("ribbon", "w_r");
    g.thickness = number("ribbon", "h");
    g.stress = number("ribbon", "sigma");
    g.density = number("ribbon", "rho");
    g.youngs_modulus = number("ribbon", "E");
    g.intrinsic_q = number("ribbon", "Q0");
    g.profile_offset = number("ribbon", "A0");
    g.profile_tilt = number("ribbon", "Al");
    g.profile_curvature = number("ribbon", "Ap");
    g.validate();
    return g;
  }

  /// Mode from the ribbon formulas, with measured overrides applied.
  [[nodiscard]] TorsionMode mode() const {
    TorsionMode m = derive_mode(ribbon(), number("mode", "T"), optional_number("mode", "Q_override"));
    const double q = m.quality();
    if (const auto f = optional_number("mode", "f_override")) {
      detail::require(*f > 0, "mode.f_override must be positive");
      m.omega_m = 2.0 * pi * *f;
      m.gamma_m = m.omega_m / q;
    }
    if (const auto inertia = optional_number("mode", "I_override")) m.inertia = *inertia;
    m.validate();
    return m;
  }

  [[nodiscard]] ProbeBeam beam() const {
    ProbeBeam b;
    b.wavelength = number("beam", "lambda");
    b.power = number("beam", "P");
    b.waist = number("beam", "w0");
    b.focus_offset = number("beam", "z");
    b.lever_arm = number("beam", "L_OL");
    b.lateral_offset = number("beam", "x_off");
    b.validate();
    return b;
  }

  [[nodiscard]] Detector detector() const {
    Detector d;
    d.eta_d = number("detector", "eta_d");
    d.extraneous_floor = number("detector", "S_extra");
    d.validate();
    return d;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace optolever::config
