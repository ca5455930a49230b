#pragma once

#include <cmath>
#include <vector>

#include <optolever/core.hpp>

namespace testing_support {

using namespace optolever;

/// Quoted device: 52.5 kHz, Q = 3.3e7, I = 3.8e-18 kg m^2, room temperature.
inline TorsionMode quoted_mode() {
  return TorsionMode::from_quality(2.0 * pi * 52.5e3, 3.3e7, 3.8e-18, 295.0);
}

/// Same oscillator with a low Q so that time-domain runs settle quickly.
inline TorsionMode desk_mode(double q = 1e3) {
  return TorsionMode::from_quality(2.0 * pi * 52.5e3, q, 3.78e-18, 295.0);
}

/// Least-squares slope of log(y) against log(x).
inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

}  // namespace testing_support
