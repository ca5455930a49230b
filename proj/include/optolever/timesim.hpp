#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "core.hpp"
#include "errors.hpp"
#include "least_squares.hpp"
#include "spectra.hpp"

// Time-domain model of the torsion mode,
//   I theta'' + I gamma_m theta' + I omega_m^2 theta = sum of torques,
// advanced with the exact transition matrix of the damped oscillator.
// Torques other than the thermal bath are held constant over a step.

namespace optolever {

struct ShotDrive {
  ProbeBeam beam;  // white torque at the radiation-pressure PSD of this beam
};

struct IntensityDrive {
  double S_tau_IM = 0;              // N^2 m^2/Hz
  double x_off = 0;                 // m, lever arm of the intensity noise
  double imprecision_coupling = 0;  // rad/W, apparent angle per watt of power noise
};

/// Auxiliary beam of power `power` whose position is modulated by white
/// noise Delta x; torque 2 P Delta x / c.
struct PositionDrive {
  double power = 0;  // W
  double S_dx = 0;   // m^2/Hz
};

struct FeedbackDrive {
  double gamma_fb = 0;  // rad/s
};

struct ToneDrive {
  double amplitude = 0;  // N m
  double omega = 0;      // rad/s
  double phase = 0;
};

struct Drives {
  bool thermal = true;
  std::optional<ShotDrive> shot;
  std::optional<IntensityDrive> intensity;
  std::optional<PositionDrive> position;
  std::optional<FeedbackDrive> feedback;
  std::optional<ToneDrive> tone;
};

struct RecordFlags {
  bool theta = true;
  bool measured = false;   // theta plus imprecision, as seen by the sensor
  bool tau_drive = false;  // all applied torques except feedback and the bath
  bool drive_x = false;    // position-drive displacement
};

struct SimConfig {
  TorsionMode mode;
  double dt = 0;
  double duration = 0;
  std::uint64_t seed = 1;
  Drives drives;
  RecordFlags record;
  double imprecision_psd = 0;  // rad^2/Hz, white, added to the measured angle
  double theta0 = 0;
  double theta_dot0 = 0;
  double settle = 0;                // s excluded from the variance statistics
  std::size_t record_stride = 1;    // keep every n-th sample
  bool spectra_requested = false;   // enforces the spectral-convergence duration

  [[nodiscard]] double gamma_eff() const {
    return mode.gamma_m + (drives.feedback ? drives.feedback->gamma_fb : 0.0);
  }
  [[nodiscard]] std::size_t steps() const {
    return static_cast<std::size_t>(std::floor(duration / dt + 0.5));
  }

  void validate() const {
    mode.validate();
    detail::require(mode.quality() > 0.5, "simulated mode must be underdamped");
    detail::require(dt > 0 && std::isfinite(dt), "dt must be positive");
    detail::require(dt <= 2.0 * pi / (20.0 * mode.omega_m),
                    "dt must resolve the oscillation: dt <= 1/(20 f_m)");
    detail::require(duration >= dt, "duration must cover at least one step");
    detail::require(settle >= 0 && settle < duration, "settle must lie inside the run");
    detail::require(record_stride >= 1, "record stride must be >= 1");
    detail::require(imprecision_psd >= 0, "imprecision PSD must be >= 0");
    if (spectra_requested)
      detail::require(duration >= 50.0 / gamma_eff(),
                      "duration must be >= 50/gamma_eff when spectra are requested");
    if (drives.shot) drives.shot->beam.validate();
    if (drives.intensity) {
      detail::require(drives.intensity->S_tau_IM >= 0, "S_tau_IM must be >= 0");
      detail::require(drives.intensity->S_tau_IM == 0 || drives.intensity->x_off != 0,
                      "intensity drive needs a nonzero x_off");
    }
    if (drives.position)
      detail::require(drives.position->power >= 0 && drives.position->S_dx >= 0,
                      "position drive power and S_dx must be >= 0");
    if (drives.feedback)
      detail::require(drives.feedback->gamma_fb >= 0, "feedback rate must be >= 0");
    if (drives.tone)
      detail::require(std::isfinite(drives.tone->amplitude) && drives.tone->omega >= 0,
                      "tone amplitude must be finite and frequency >= 0");
  }
};

struct SimSeries {
  double dt = 0;  // sample spacing of the recorded series
  std::vector<double> theta;
  std::vector<double> measured;
  std::vector<double> tau_drive;
  std::vector<double> drive_x;
  double theta_variance = 0;      // after `settle`, from every integrator step
  double theta_dot_variance = 0;
  std::size_t stat_samples = 0;
};

namespace detail {

struct Propagator {
  double phi[2][2];
  double gam[2];   // response to a unit torque held over one step
  double chol[3];  // lower Cholesky factor of the thermal process noise: l00, l10, l11
};

inline Propagator make_propagator(const TorsionMode& m, double dt, double S_tau_white) {
  const double w2 = m.omega_m * m.omega_m;
  const double a = 0.5 * m.gamma_m;
  const double wd = std::sqrt(w2 - a * a);
  const double e = std::exp(-a * dt);
  const double c = std::cos(wd * dt);
  const double s = std::sin(wd * dt);
  Propagator p{};
  p.phi[0][0] = e * (c + a * s / wd);
  p.phi[0][1] = e * s / wd;
  p.phi[1][0] = -e * w2 * s / wd;
  p.phi[1][1] = e * (c - a * s / wd);

  // A^-1 (Phi - 1) [0, 1/I]^T
  p.gam[0] = (-m.gamma_m * p.phi[0][1] - (p.phi[1][1] - 1.0)) / (m.inertia * w2);
  p.gam[1] = p.phi[0][1] / m.inertia;

  // Q = P_inf - Phi P_inf Phi^T with P_inf the stationary covariance.
  const double D = S_tau_white / (2.0 * m.inertia * m.inertia);
  const double p0 = D / (2.0 * m.gamma_m * w2);
  const double p1 = D / (2.0 * m.gamma_m);
  const auto& f = p.phi;
  const double q00 = p0 - (f[0][0] * f[0][0] * p0 + f[0][1] * f[0][1] * p1);
  const double q01 = -(f[0][0] * f[1][0] * p0 + f[0][1] * f[1][1] * p1);
  const double q11 = p1 - (f[1][0] * f[1][0] * p0 + f[1][1] * f[1][1] * p1);
  const double l00 = std::sqrt(std::max(q00, 0.0));
  const double l10 = l00 > 0 ? q01 / l00 : 0.0;
  p.chol[0] = l00;
  p.chol[1] = l10;
  p.chol[2] = std::sqrt(std::max(q11 - l10 * l10, 0.0));
  return p;
}

}  // namespace detail

inline SimSeries integrate(const SimConfig& cfg, const PhysicalConstants& k = codata) {
  cfg.validate();
  const TorsionMode& m = cfg.mode;
  const auto& d = cfg.drives;
  const double dt = cfg.dt;
  const double s_th = d.thermal ? thermal_torque_psd(m, k) : 0.0;
  const auto prop = detail::make_propagator(m, dt, s_th);

  const double sig_imp = std::sqrt(cfg.imprecision_psd / (2.0 * dt));
  const double s_shot = d.shot ? backaction_torque_psd(d.shot->beam, k) : 0.0;
  const double sig_shot = std::sqrt(s_shot / (2.0 * dt));
  double sig_power = 0, im_lever = 0, im_kappa = 0;
  if (d.intensity && d.intensity->S_tau_IM > 0) {
    im_lever = 2.0 * d.intensity->x_off / k.c;
    sig_power = std::sqrt(d.intensity->S_tau_IM / (im_lever * im_lever) / (2.0 * dt));
    im_kappa = d.intensity->imprecision_coupling;
  }
  const double sig_dx = d.position ? std::sqrt(d.position->S_dx / (2.0 * dt)) : 0.0;
  const double pos_lever = d.position ? 2.0 * d.position->power / k.c : 0.0;
  const double g_fb = d.feedback ? d.feedback->gamma_fb : 0.0;

  // Reference energy scale (theta^2 + (theta'/omega)^2) for the instability check.
  const double w2 = m.omega_m * m.omega_m;
  const double white_torque = s_th + s_shot + (d.intensity ? d.intensity->S_tau_IM : 0.0) +
                              pos_lever * pos_lever * (d.position ? d.position->S_dx : 0.0);
  double e_ref = cfg.theta0 * cfg.theta0 + cfg.theta_dot0 * cfg.theta_dot0 / w2;
  e_ref = std::max(e_ref, white_torque / (4.0 * m.inertia * m.inertia * w2 * m.gamma_m));
  e_ref = std::max(e_ref, g_fb * g_fb * cfg.imprecision_psd / m.gamma_m);
  if (d.tone) {
    const double amp = std::abs(d.tone->amplitude) * std::abs(susceptibility(m, m.omega_m));
    e_ref = std::max(e_ref, amp * amp);
  }
  e_ref = std::max(e_ref, 1e-300);
  const double e_limit = 1e8 * e_ref;

  const std::size_t n = cfg.steps();
  const std::size_t stride = cfg.record_stride;
  const std::size_t n_rec = n / stride;
  const auto n_settle = static_cast<std::size_t>(std::ceil(cfg.settle / dt));

  SimSeries out;
  out.dt = dt * static_cast<double>(stride);
  if (cfg.record.theta) out.theta.reserve(n_rec);
  if (cfg.record.measured) out.measured.reserve(n_rec);
  if (cfg.record.tau_drive) out.tau_drive.reserve(n_rec);
  if (cfg.record.drive_x) out.drive_x.reserve(n_rec);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double x0 = cfg.theta0, x1 = cfg.theta_dot0;
  double y_prev = 0;
  double block_noise = 0, block_tau = 0, block_dx = 0, block_theta = 0;
  double sum_t = 0, sum_t2 = 0, sum_v = 0, sum_v2 = 0;
  std::size_t stats = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;

    const double dP = sig_power > 0 ? sig_power * gauss(rng) : 0.0;
    const double noise = (sig_imp > 0 ? sig_imp * gauss(rng) : 0.0) + im_kappa * dP;
    const double y = x0 + noise;

    double tau = 0;
    if (d.tone) tau += d.tone->amplitude * std::cos(d.tone->omega * (t + 0.5 * dt) + d.tone->phase);
    if (sig_shot > 0) tau += sig_shot * gauss(rng);
    tau += im_lever * dP;
    double dx = 0;
    if (d.position) {
      dx = sig_dx * gauss(rng);
      tau += pos_lever * dx;
    }
    const double tau_ext = tau;
    if (g_fb > 0 && i > 0) tau -= m.inertia * g_fb * (y - y_prev) / dt;
    y_prev = y;

    if (i % stride == 0) block_theta = x0;
    block_noise += noise;
    block_tau += tau_ext;
    block_dx += dx;
    if (i % stride == stride - 1) {
      const double inv = 1.0 / static_cast<double>(stride);
      if (cfg.record.theta) out.theta.push_back(block_theta);
      if (cfg.record.measured) out.measured.push_back(block_theta + block_noise * inv);
      if (cfg.record.tau_drive) out.tau_drive.push_back(block_tau * inv);
      if (cfg.record.drive_x) out.drive_x.push_back(block_dx * inv);
      block_noise = block_tau = block_dx = 0;
    }

    if (i >= n_settle) {
      sum_t += x0;
      sum_t2 += x0 * x0;
      sum_v += x1;
      sum_v2 += x1 * x1;
      ++stats;
    }

    double n0 = 0, n1 = 0;
    if (s_th > 0) {
      const double z0 = gauss(rng), z1 = gauss(rng);
      n0 = prop.chol[0] * z0;
      n1 = prop.chol[1] * z0 + prop.chol[2] * z1;
    }
    const double nx0 = prop.phi[0][0] * x0 + prop.phi[0][1] * x1 + prop.gam[0] * tau + n0;
    const double nx1 = prop.phi[1][0] * x0 + prop.phi[1][1] * x1 + prop.gam[1] * tau + n1;
    x0 = nx0;
    x1 = nx1;

    if ((i & 1023u) == 1023u) {
      const double e = x0 * x0 + x1 * x1 / w2;
      if (!std::isfinite(e) || e > e_limit) {
        char msg[320];
        std::snprintf(msg, sizeof msg,
                      "integration unstable at t = %.6g s: energy %.3g x reference; "
                      "gamma_fb = %.6g rad/s, gamma_fb*dt = %.3g, omega_m*dt = %.3g",
                      t, e / e_ref, g_fb, g_fb * dt, m.omega_m * dt);
        throw NumericalError(msg);
      }
    }
  }

  if (stats > 1) {
    const auto s = static_cast<double>(stats);
    out.theta_variance = std::max(0.0, (sum_t2 - sum_t * sum_t / s) / (s - 1.0));
    out.theta_dot_variance = std::max(0.0, (sum_v2 - sum_v * sum_v / s) / (s - 1.0));
  }
  out.stat_samples = stats;
  return out;
}

// ---------------------------------------------------------------------------
// Spectral estimation

struct EstimatedSpectrum {
  std::vector<double> freqs;  // Hz
  std::vector<double> psd;    // units^2/Hz, single-sided
  std::size_t segments = 0;
  std::size_t nperseg = 0;
  double df = 0;
  double parseval_ratio = 0;  // sum(psd) df / variance
  std::string method = "averaged periodogram, Hann window, 50% overlap";

  /// Sum of psd * df over [f_lo, f_hi].
  [[nodiscard]] double band_power(double f_lo, double f_hi) const {
    double acc = 0;
    for (std::size_t i = 0; i < freqs.size(); ++i)
      if (freqs[i] >= f_lo && freqs[i] <= f_hi) acc += psd[i];
    return acc * df;
  }
};

struct CoherenceResult {
  std::vector<double> freqs;  // Hz
  std::vector<double> magnitude;
  std::vector<double> phase;  // arg S_ab, rad
  std::size_t segments = 0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// One r2c transform with its own buffers; plan creation is serialized.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    if (!in_ || !out_) {
      fftw_free(in_);
      fftw_free(out_);
      throw NumericalError("FFT buffer allocation failed");
    }
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    if (!plan_) {
      fftw_free(in_);
      fftw_free(out_);
      throw NumericalError("FFT planning failed");
    }
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  [[nodiscard]] std::complex<double> bin(std::size_t i) const { return {out_[i][0], out_[i][1]}; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline std::size_t default_nperseg(std::size_t n) {
  // Largest power of two giving at least 8 half-overlapping segments.
  std::size_t l = 16;
  while (2 * l <= 2 * n / 9) l *= 2;
  return l;
}

inline std::size_t segment_count(std::size_t n, std::size_t l) {
  if (n < l) return 0;
  return (n - l) / (l / 2) + 1;
}

inline std::vector<double> hann(std::size_t l) {
  std::vector<double> w(l);
  for (std::size_t i = 0; i < l; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(l));
  return w;
}

/// Windowed, mean-removed spectrum of segment j.
inline void segment_transform(RealFft& fft, std::span<const double> x, std::size_t start,
                              const std::vector<double>& w) {
  const std::size_t l = w.size();
  double mean = 0;
  for (std::size_t i = 0; i < l; ++i) mean += x[start + i];
  mean /= static_cast<double>(l);
  double* in = fft.input();
  for (std::size_t i = 0; i < l; ++i) in[i] = (x[start + i] - mean) * w[i];
  fft.execute();
}

inline void check_series(std::span<const double> x, double dt, std::size_t l) {
  if (!(dt > 0)) throw ParameterError("sample spacing must be positive");
  if (l < 16 || (l & (l - 1)) != 0) throw ParameterError("segment length must be a power of two >= 16");
  if (segment_count(x.size(), l) < 8)
    throw DataError("series too short: need at least 8 segments of " + std::to_string(l) +
                    " samples, have " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("series contains non-finite samples");
}

}  // namespace detail

inline EstimatedSpectrum estimate_psd(std::span<const double> x, double dt,
                                      std::size_t nperseg = 0, bool check_parseval = true) {
  const std::size_t l = nperseg ? nperseg : detail::default_nperseg(x.size());
  detail::check_series(x, dt, l);
  const std::size_t segs = detail::segment_count(x.size(), l);
  const auto w = detail::hann(l);
  double w2 = 0;
  for (double v : w) w2 += v * v;
  const double fs = 1.0 / dt;

  EstimatedSpectrum out;
  out.nperseg = l;
  out.segments = segs;
  out.df = fs / static_cast<double>(l);
  out.freqs.resize(l / 2 + 1);
  out.psd.assign(l / 2 + 1, 0.0);
  for (std::size_t i = 0; i <= l / 2; ++i) out.freqs[i] = static_cast<double>(i) * out.df;

  detail::RealFft fft(l);
  for (std::size_t s = 0; s < segs; ++s) {
    detail::segment_transform(fft, x, s * (l / 2), w);
    for (std::size_t i = 0; i <= l / 2; ++i) out.psd[i] += std::norm(fft.bin(i));
  }
  const double scale = 1.0 / (fs * w2 * static_cast<double>(segs));
  for (std::size_t i = 0; i <= l / 2; ++i) {
    const bool edge = i == 0 || i == l / 2;
    out.psd[i] *= scale * (edge ? 1.0 : 2.0);
  }

  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  double total = 0;
  for (double p : out.psd) total += p;
  total *= out.df;
  out.parseval_ratio = var > 0 ? total / var : (total == 0 ? 1.0 : 0.0);
  if (check_parseval && std::abs(out.parseval_ratio - 1.0) > 0.05) {
    char msg[200];
    std::snprintf(msg, sizeof msg,
                  "Parseval check failed: integrated PSD / variance = %.4f (non-stationary "
                  "series or power below the frequency resolution)",
                  out.parseval_ratio);
    throw NumericalError(msg);
  }
  return out;
}

inline CoherenceResult coherence(std::span<const double> a, std::span<const double> b, double dt,
                                 std::size_t nperseg = 0) {
  if (a.size() != b.size()) throw DataError("coherence needs series on a common grid");
  const std::size_t l = nperseg ? nperseg : detail::default_nperseg(a.size());
  detail::check_series(a, dt, l);
  detail::check_series(b, dt, l);
  const std::size_t segs = detail::segment_count(a.size(), l);
  const auto w = detail::hann(l);
  const std::size_t nb = l / 2 + 1;

  std::vector<double> saa(nb, 0.0), sbb(nb, 0.0);
  std::vector<std::complex<double>> sab(nb, 0.0);
  detail::RealFft fa(l), fb(l);
  for (std::size_t s = 0; s < segs; ++s) {
    detail::segment_transform(fa, a, s * (l / 2), w);
    detail::segment_transform(fb, b, s * (l / 2), w);
    for (std::size_t i = 0; i < nb; ++i) {
      const auto A = fa.bin(i), B = fb.bin(i);
      saa[i] += std::norm(A);
      sbb[i] += std::norm(B);
      sab[i] += std::conj(A) * B;
    }
  }
  CoherenceResult out;
  out.segments = segs;
  out.freqs.resize(nb);
  out.magnitude.resize(nb);
  out.phase.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    out.freqs[i] = static_cast<double>(i) / (static_cast<double>(l) * dt);
    const double den = std::sqrt(saa[i] * sbb[i]);
    out.magnitude[i] = den > 0 ? std::min(1.0, std::abs(sab[i]) / den) : 0.0;
    out.phase[i] = std::arg(sab[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ringdown

struct RingdownFit {
  double Q = 0;  // +inf when divergent
  double gamma = 0;
  double gamma_stderr = 0;
  double energy0 = 0;  // mean-square amplitude at t = 0 (decaying part)
  double floor = 0;    // mean-square noise floor
  bool divergent = false;
};

/// Fits the windowed mean square E(t) = E0 exp(-gamma t) + floor to a ringdown
/// (log residuals, so early and late windows weigh alike). Windows span about
/// four periods of omega_hint. An envelope that does not decay significantly
/// is reported as divergent; a growing one is a fit error.
inline RingdownFit ringdown_fit(std::span<const double> x, double dt, double omega_hint) {
  detail::require(dt > 0 && omega_hint > 0, "dt and mode frequency must be positive");
  const double period = 2.0 * pi / omega_hint;
  if (period < 4.0 * dt) throw ParameterError("ringdown sampled at fewer than 4 points per period");
  const auto win = static_cast<std::size_t>(std::max(4.0, std::round(4.0 * period / dt)));
  const std::size_t nw = x.size() / win;
  if (nw < 10) throw DataError("ringdown too short: need at least 10 windows of 4 periods");

  std::vector<double> t(nw), e(nw);
  for (std::size_t j = 0; j < nw; ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < win; ++i) {
      const double v = x[j * win + i];
      if (!std::isfinite(v)) throw DataError("ringdown contains non-finite samples");
      acc += v * v;
    }
    e[j] = acc / static_cast<double>(win);
    t[j] = (static_cast<double>(j) + 0.5) * static_cast<double>(win) * dt;
  }
  const double e_max = *std::max_element(e.begin(), e.end());
  if (!(e_max > 0)) throw FitError("ringdown has no signal");
  const double e_min = std::max(*std::min_element(e.begin(), e.end()), e_max * 1e-30);
  const double t_span = t.back();

  // Log-linear pre-fit over the windows well above the late-time level.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t cnt = 0;
  const double e_late = e.back();
  const bool drops = e.front() > 10.0 * e_late;
  for (std::size_t j = 0; j < nw; ++j) {
    if (drops && j > 2 && e[j] < 3.0 * e_late) break;
    const double ly = std::log(std::max(e[j], e_min));
    sx += t[j];
    sy += ly;
    sxx += t[j] * t[j];
    sxy += t[j] * ly;
    ++cnt;
  }
  const auto c = static_cast<double>(cnt);
  const double det = c * sxx - sx * sx;
  double slope = det > 0 ? (c * sxy - sx * sy) / det : 0.0;
  double slope_se = std::numeric_limits<double>::infinity();
  if (cnt > 2 && det > 0) {
    const double icpt = (sy - slope * sx) / c;
    double rss = 0;
    for (std::size_t j = 0; j < cnt; ++j) {
      const double r = std::log(std::max(e[j], e_min)) - (icpt + slope * t[j]);
      rss += r * r;
    }
    slope_se = std::sqrt(rss / (c - 2.0) * c / det);
  }

  RingdownFit out;
  if (slope > 3.0 * slope_se && slope * t_span > 0.01)
    throw FitError("ringdown envelope grows: input is not a free decay");
  if (!(slope < -3.0 * slope_se) || -slope * t_span < 0.01) {
    out.divergent = true;
    out.Q = std::numeric_limits<double>::infinity();
    out.gamma = std::max(0.0, -slope);
    out.gamma_stderr = slope_se;
    out.energy0 = std::exp(sy / c);
    return out;
  }

  // Scaled parameters: a = E0/e_max, g = gamma t_span, b = floor/e_max.
  Eigen::VectorXd p(3);
  p << std::exp((sy - slope * sx) / c) / e_max, -slope * t_span, 0.01 * e_min / e_max;
  auto model = [&](const Eigen::VectorXd& q, std::size_t j) {
    return q[0] * std::exp(-q[1] * t[j] / t_span) + q[2];
  };
  auto residual = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd r(nw);
    for (std::size_t j = 0; j < nw; ++j)
      r[static_cast<Eigen::Index>(j)] = std::log(e[j] / e_max) - std::log(model(q, j));
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& q) {
    Eigen::MatrixXd J(nw, 3);
    for (std::size_t j = 0; j < nw; ++j) {
      const double ex = std::exp(-q[1] * t[j] / t_span);
      const double mj = model(q, j);
      const auto r = static_cast<Eigen::Index>(j);
      J(r, 0) = -ex / mj;
      J(r, 1) = q[0] * ex * t[j] / t_span / mj;
      J(r, 2) = -1.0 / mj;
    }
    return J;
  };
  auto project = [](Eigen::VectorXd& q) {
    q[0] = std::max(q[0], 1e-300);
    q[2] = std::max(q[2], 0.0);
  };
  DampedLeastSquares lm;
  const auto fit = lm.solve(residual, jacobian, p, project);
  const double gamma = fit.params[1] / t_span;
  if (!(gamma > 0)) throw FitError("ringdown fit returned a non-positive decay rate");
  out.gamma = gamma;
  out.gamma_stderr = std::sqrt(std::max(fit.covariance(1, 1), 0.0)) / t_span;
  out.Q = omega_hint / gamma;
  out.energy0 = fit.params[0] * e_max;
  out.floor = fit.params[2] * e_max;
  return out;
}

/// Q = omega/gamma from a ringdown; non-decaying input is a fit error.
inline double ringdown_q(std::span<const double> x, double dt, double omega_hint) {
  const auto fit = ringdown_fit(x, dt, omega_hint);
  if (fit.divergent) throw FitError("ringdown does not decay: Q diverges");
  return fit.Q;
}

// ---------------------------------------------------------------------------
// Cold damping

struct ColdDampResult {
  SimSeries series;
  double gamma_eff = 0;
  double n_m = 0;      // from the time-domain variance of theta
  double n_m_psd = 0;  // from the theta PSD integrated over +/- 25 gamma_eff
};

/// Runs the loop and converts the physical variance to an occupation,
/// n = I omega_m <theta^2> / hbar - 1/2.
inline ColdDampResult cold_damp_run(SimConfig cfg, const PhysicalConstants& k = codata) {
  if (!cfg.drives.feedback) throw ParameterError("cold_damp_run needs a feedback drive");
  if (cfg.mode.quality() > 1e5)
    throw ParameterError("cold damping runs need a desk-scale Q (<= 1e5)");
  cfg.record.theta = true;
  cfg.spectra_requested = true;
  const double g_eff = cfg.gamma_eff();
  if (cfg.settle == 0) cfg.settle = std::min(10.0 / g_eff, 0.1 * cfg.duration);

  ColdDampResult out;
  out.gamma_eff = g_eff;
  out.series = integrate(cfg, k);
  const TorsionMode& m = cfg.mode;
  const double to_n = m.inertia * m.omega_m / k.hbar;
  out.n_m = to_n * out.series.theta_variance - 0.5;

  const auto skip = static_cast<std::size_t>(std::ceil(cfg.settle / out.series.dt));
  std::span<const double> th(out.series.theta);
  th = th.subspan(std::min(skip, th.size()));
  // Resolve the loop linewidth with a few bins, keeping at least 8 segments.
  const double lw_hz = g_eff / (2.0 * pi);
  std::size_t l = 16;
  while (static_cast<double>(l) * out.series.dt * lw_hz < 8.0) l *= 2;
  l = std::min(l, detail::default_nperseg(th.size()));
  const auto psd = estimate_psd(th, out.series.dt, l, false);
  const double f_m = m.omega_m / (2.0 * pi);
  const double band = 25.0 * lw_hz;
  out.n_m_psd = to_n * psd.band_power(f_m - band, f_m + band) - 0.5;
  return out;
}

}  // namespace optolever
