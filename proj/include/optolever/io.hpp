#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "calib.hpp"
#include "errors.hpp"
#include "spectra.hpp"

namespace optolever::io {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// 17 significant digits, round-trips every double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

/// Row-major numeric table written as CSV or JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw DataError("table row width does not match the header");
    rows.push_back(std::move(row));
  }
};

/// First line "# config_hash=...", then the header and one line per row.
inline void write_csv(std::ostream& os, const Table& t, const std::string& config_hash) {
  os << "# config_hash=" << config_hash << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << fmt(row[i]);
    os << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Table& t, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["columns"] = t.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto r = nlohmann::ordered_json::array();
    for (double v : row) r.push_back(std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json());
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

inline Table spectrum_table(const SpectrumSeries& s) {
  Table t{{"freq_hz", "total", "imprecision", "backaction", "thermal", "zero_point", "correlation"}, {}};
  for (std::size_t i = 0; i < s.size(); ++i)
    t.add({s.freqs[i] / (2.0 * pi), s.total[i], s.imprecision[i], s.backaction[i], s.thermal[i],
           s.zero_point[i], s.correlation[i]});
  return t;
}

inline Table raw_spectrum_table(const RawSpectrum& s, const std::string& psd_column = "psd_v2_hz") {
  Table t{{"freq_hz", psd_column}, {}};
  for (std::size_t i = 0; i < s.size(); ++i) t.add({s.freqs[i], s.psd[i]});
  return t;
}

/// Reads two numeric columns, freq_hz and a PSD column (psd_v2_hz, or
/// psd_rad2_hz for calibrated data). Lines starting with '#' are skipped.
inline RawSpectrum read_raw_spectrum_csv(std::istream& is) {
  RawSpectrum out;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "freq_hz,psd_v2_hz" && line != "freq_hz,psd_rad2_hz")
        throw DataError("spectrum CSV header must be freq_hz,psd_v2_hz or freq_hz,psd_rad2_hz");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("spectrum CSV line " + std::to_string(lineno) + ": expected two columns");
    try {
      std::size_t used = 0;
      const double f = std::stod(line.substr(0, comma), &used);
      const std::string rest = line.substr(comma + 1);
      const double p = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing text");
      out.freqs.push_back(f);
      out.psd.push_back(p);
    } catch (const std::logic_error&) {
      throw DataError("spectrum CSV line " + std::to_string(lineno) + ": not a number");
    }
  }
  if (!header) throw DataError("spectrum CSV has no header");
  out.validate();
  return out;
}

}  // namespace optolever::io
