#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "lqm/ctm.hpp"
#include "lqm/simulation.hpp"

namespace lqm {

// --- single-link oracle -----------------------------------------------------
// One-lane, one-mile link, V=65, W=16.25, k_jam=180, initially empty, with
// upstream demand 2340 and downstream supply 1170.

namespace single_link {

inline constexpr double kBreak1 = 0.0106638916; // ln2/65, k reaches 18
inline constexpr double kBreak2 = 0.0260485070; // (ln2+1)/65, k reaches 36

inline double closed_form_density(double t) {
  if (t < 0) throw std::invalid_argument("t must be nonnegative");
  const double t1 = std::log(2.0) / 65.0;
  const double t2 = (std::log(2.0) + 1.0) / 65.0;
  if (t <= t1) return 36.0 * (1.0 - std::exp(-65.0 * t));
  if (t <= t2) return 18.0 + 1170.0 * (t - t1);
  return 108.0 - 72.0 * std::exp((std::log(2.0) + 1.0) / 4.0 - 16.25 * t);
}

/// Kinematic-wave in/out-fluxes: the rarefaction head reaches the downstream
/// boundary at 55 s, the shock reaches the upstream boundary at 277 s.
inline std::pair<double, double> kw_fluxes(double t) {
  if (t < 0) throw std::invalid_argument("t must be nonnegative");
  const double t_out = 1.0 / 65.0;               // 55 s
  const double t_in = 1.0 / 65.0 + 1.0 / 16.25;  // 277 s
  const double f = t < t_in ? 2340.0 : 1170.0;
  const double g = t < t_out ? 0.0 : 1170.0;
  return {f, g};
}

}  // namespace single_link

// --- signalized ring MFD ----------------------------------------------------

/// Cycle-averaged flux of a signalized link under the link queue model:
/// green_ratio * Q(k). Independent of link length and cycle length.
inline double mfd_link_queue(const FundamentalDiagram& fd, double green_ratio,
                             double k) {
  if (green_ratio < 0 || green_ratio > 1) {
    throw std::out_of_range("green ratio must be in [0,1]");
  }
  return green_ratio * fd.flow(k);
}

struct RingMfdPoint {
  double k = 0;
  double cycle = 0;  // hours
  double mean_flux = 0;
};

/// Closed signalized ring: one normal link looped onto itself through one
/// gated linear junction.
inline Network make_ring_network(double length,
                                 std::shared_ptr<const FundamentalDiagram> fd,
                                 const SignalProgram& signal) {
  JunctionSpec j;
  j.id = 0;
  j.upstream = {0};
  j.downstream = {0};
  j.rule = FluxRule::linear();
  j.signal = signal;
  return build_network({{0, LinkKind::normal, length, fd}}, {j}, {});
}

/// CTM estimate of the ring MFD point: the junction flux averaged over the
/// last `avg_cycles` signal cycles.
inline RingMfdPoint mfd_ctm_point(double ring_length,
                                  std::shared_ptr<const FundamentalDiagram> fd,
                                  double k, double cycle, double green_ratio,
                                  const CtmConfig& cfg, int avg_cycles = 4) {
  if (cfg.horizon < (avg_cycles + 1) * cycle) {
    throw std::invalid_argument("horizon too short for cycle averaging");
  }
  SignalProgram sig;
  sig.cycle = cycle;
  sig.green = {{0.0, green_ratio * cycle}};
  Network net = make_ring_network(ring_length, fd, sig);
  NetworkState ic = make_empty_state(net);
  ic.k[0] = k;
  BoundaryConditions bc = BoundaryConditions::make_default(net);

  CtmConfig c = cfg;
  c.record_every = 1;
  Trajectory traj = ctm_simulate(net, ic, bc, c);

  const double t_from = cfg.horizon - avg_cycles * cycle;
  double sum = 0;
  long count = 0;
  for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    if (traj.samples[i].t >= t_from - 1e-12) {
      sum += traj.samples[i].g[0];
      ++count;
    }
  }
  return {k, cycle, count > 0 ? sum / count : 0.0};
}

/// Link queue estimate of the same point, from an actual simulation rather
/// than the closed form.
inline RingMfdPoint mfd_lq_point(double ring_length,
                                 std::shared_ptr<const FundamentalDiagram> fd,
                                 double k, double cycle, double green_ratio,
                                 const SimConfig& cfg, int avg_cycles = 4) {
  if (cfg.horizon < (avg_cycles + 1) * cycle) {
    throw std::invalid_argument("horizon too short for cycle averaging");
  }
  SignalProgram sig;
  sig.cycle = cycle;
  sig.green = {{0.0, green_ratio * cycle}};
  Network net = make_ring_network(ring_length, fd, sig);
  NetworkState ic = make_empty_state(net);
  ic.k[0] = k;
  BoundaryConditions bc = BoundaryConditions::make_default(net);

  SimConfig c = cfg;
  c.record_every = 1;
  Trajectory traj = simulate(net, ic, bc, c);

  const double t_from = cfg.horizon - avg_cycles * cycle;
  double sum = 0;
  long count = 0;
  for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
    if (traj.samples[i].t >= t_from - 1e-12) {
      sum += traj.samples[i].g[0];
      ++count;
    }
  }
  return {k, cycle, count > 0 ? sum / count : 0.0};
}

// --- DM2 diverge-merge network ----------------------------------------------

struct StabilityReport {
  double xi = 0;
  double k1 = 0, k2 = 0;      // stationary densities of the reduced system
  double a = 0, b = 0;        // dd1/dk1 > 0, ds2/dk2 < 0
  std::complex<double> lambda1, lambda2;
};

/// Stationary densities of the reduced two-link system on the branch where
/// link 1 is strictly under-critical and link 2 strictly over-critical:
/// d1 = xi C3, k1 = d1/V1, s2 = C3 - d1, k2 = inverse_supply(fd2, s2).
inline StabilityReport dm2_stationary_state(double xi, double c3,
                                            const FundamentalDiagram& fd1,
                                            const FundamentalDiagram& fd2) {
  if (!(xi > 1.0 / 3.0 && xi < 0.5)) {
    throw std::out_of_range("dm2_stationary_state: xi must be in (1/3, 1/2)");
  }
  StabilityReport rep;
  rep.xi = xi;
  const double d1 = xi * c3;
  rep.k1 = d1 / fd1.free_flow_speed();
  const double s2 = c3 - d1;
  rep.k2 = fd2.inverse_supply(s2);
  if (rep.k1 > fd1.critical_density() || rep.k2 < fd2.critical_density()) {
    throw std::domain_error("dm2_stationary_state: SUC/SOC branch violated");
  }
  rep.a = fd1.free_flow_speed();
  rep.b = -fd2.backward_wave_speed();
  return rep;
}

/// Eigenvalues of the reduced DM2 Jacobian
///   [ -a/L1   xi/(1-xi) b/L1 ]
///   [  a/L2   b/L2           ]
/// With L1 = L2 = 1 the characteristic equation is
/// lambda^2 + (a-b) lambda - ab/(1-xi) = 0.
inline std::pair<std::complex<double>, std::complex<double>>
dm2_jacobian_eigen(double xi, double a, double b, double l1 = 1.0,
                   double l2 = 1.0) {
  if (!(a > 0) || !(b < 0) || !(xi > 0 && xi < 1) || !(l1 > 0) || !(l2 > 0)) {
    throw std::invalid_argument("dm2_jacobian_eigen: need a>0, b<0, xi in (0,1)");
  }
  const double tr = -a / l1 + b / l2;
  const double det = (-a / l1) * (b / l2) - (xi / (1 - xi)) * (b / l1) * (a / l2);
  const std::complex<double> disc =
      std::sqrt(std::complex<double>(tr * tr - 4 * det, 0.0));
  return {(tr + disc) / 2.0, (tr - disc) / 2.0};
}

// --- oscillation classification ---------------------------------------------

enum class OscillationClass { converged, damped, persistent };

struct OscillationReport {
  OscillationClass cls = OscillationClass::converged;
  std::optional<double> period;  // hours, when oscillatory
  double terminal_mean = 0;
  double terminal_amplitude = 0;  // last-quarter peak-to-peak
};

inline const char* to_string(OscillationClass c) {
  switch (c) {
    case OscillationClass::converged: return "converged";
    case OscillationClass::damped: return "damped-oscillatory";
    case OscillationClass::persistent: return "persistent-oscillatory";
  }
  return "?";
}

namespace detail {

/// Indices of interior local maxima whose prominence against the neighboring
/// minima exceeds `prominence`.
inline std::vector<std::size_t> prominent_peaks(std::span<const double> s,
                                                std::size_t from,
                                                std::size_t to,
                                                double prominence) {
  std::vector<std::size_t> peaks;
  for (std::size_t i = from + 1; i + 1 < to; ++i) {
    if (!(s[i] >= s[i - 1] && s[i] > s[i + 1])) continue;
    double left_min = s[i], right_min = s[i];
    for (std::size_t k = i; k > from; --k) {
      left_min = std::min(left_min, s[k - 1]);
      if (s[k - 1] > s[i]) break;
    }
    for (std::size_t k = i + 1; k < to; ++k) {
      right_min = std::min(right_min, s[k]);
      if (s[k] > s[i]) break;
    }
    if (std::min(s[i] - left_min, s[i] - right_min) >= prominence) {
      peaks.push_back(i);
    }
  }
  return peaks;
}

}  // namespace detail

/// Terminal-window classification. Fixed thresholds: persistent needs a
/// last-quarter peak-to-peak amplitude above 5% of the terminal mean with an
/// amplitude ratio last/previous quarter above 0.8; damped needs prominent
/// oscillation earlier in the series that has decayed by the end.
inline OscillationReport detect_oscillation(std::span<const double> series,
                                            double dt) {
  const std::size_t n = series.size();
  if (n < 32) throw std::invalid_argument("detect_oscillation: series too short");

  const auto window_amp = [&](std::size_t from, std::size_t to) {
    double lo = series[from], hi = series[from];
    for (std::size_t i = from; i < to; ++i) {
      lo = std::min(lo, series[i]);
      hi = std::max(hi, series[i]);
    }
    return hi - lo;
  };

  const std::size_t q = n / 4;
  const double amp2 = window_amp(q, 2 * q);
  const double amp3 = window_amp(2 * q, 3 * q);
  const double amp4 = window_amp(3 * q, n);

  OscillationReport rep;
  double mean = 0;
  for (std::size_t i = 3 * q; i < n; ++i) mean += series[i];
  mean /= static_cast<double>(n - 3 * q);
  rep.terminal_mean = mean;
  rep.terminal_amplitude = amp4;

  const double scale = std::max(std::abs(mean), 1e-12);
  const double prominence = 0.005 * scale;

  const auto peaks_last_half = detail::prominent_peaks(series, n / 2, n,
                                                       prominence);
  if (peaks_last_half.size() >= 2) {
    double spacing = 0;
    for (std::size_t i = 1; i < peaks_last_half.size(); ++i) {
      spacing += static_cast<double>(peaks_last_half[i] - peaks_last_half[i - 1]);
    }
    rep.period = spacing / (peaks_last_half.size() - 1) * dt;
  }

  const bool loud_now = amp4 > 0.05 * scale;
  const bool sustained = amp3 > 0 && amp4 / amp3 > 0.8;
  if (loud_now && sustained && peaks_last_half.size() >= 2) {
    rep.cls = OscillationClass::persistent;
    return rep;
  }

  // Damped: repeated peaks early in the series with at least one significant
  // swing, even if the envelope has fully decayed by the later windows.
  const auto peaks_early = detail::prominent_peaks(series, 0, 3 * q,
                                                   prominence);
  double max_prom = 0;
  for (std::size_t p : peaks_early) {
    double left = series[p], right = series[p];
    for (std::size_t i = p; i-- > 0 && series[i] <= series[p];) {
      left = std::min(left, series[i]);
    }
    for (std::size_t i = p + 1; i < n && series[i] <= series[p]; ++i) {
      right = std::min(right, series[i]);
    }
    max_prom = std::max(max_prom, series[p] - std::max(left, right));
  }
  if (peaks_early.size() >= 2 && max_prom > 0.05 * scale) {
    rep.cls = OscillationClass::damped;
    return rep;
  }

  rep.cls = OscillationClass::converged;
  return rep;
}

}  // namespace lqm
