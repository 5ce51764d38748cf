#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <sstream>
#include <string>

#include "kerrecho/classical.hpp"
#include "kerrecho/fock.hpp"
#include "kerrecho/open_system.hpp"
#include "kerrecho/types.hpp"

namespace kerrecho::analysis {

using classical::PhaseGrid;

// ---------------------------------------------------------------------------
// Husimi Q-distribution
// ---------------------------------------------------------------------------

namespace detail {

/// Coherent-state amplitudes <n|alpha> in log space.
inline void coherent_row(Complex alpha, Eigen::VectorXcd& v) {
  const auto dim = v.size();
  if (alpha == Complex{0.0, 0.0}) {
    v.setZero();
    v[0] = 1.0;
    return;
  }
  const double log_mag = std::log(std::abs(alpha));
  const double phase = std::arg(alpha);
  const double a2 = std::norm(alpha);
  for (int n = 0; n < dim; ++n)
    v[n] = std::polar(std::exp(n * log_mag - 0.5 * a2 - 0.5 * std::lgamma(n + 1.0)),
                      n * phase);
}

inline PhaseGrid make_grid(double q_lo, double q_hi, double p_lo, double p_hi,
                           int resolution) {
  if (resolution < 2) throw std::invalid_argument("husimi_q: resolution >= 2");
  PhaseGrid grid;
  grid.q_edges.resize(resolution + 1);
  grid.p_edges.resize(resolution + 1);
  for (int i = 0; i <= resolution; ++i) {
    grid.q_edges[i] = q_lo + (q_hi - q_lo) * i / resolution;
    grid.p_edges[i] = p_lo + (p_hi - p_lo) * i / resolution;
  }
  grid.density = Eigen::MatrixXd::Zero(resolution, resolution);
  return grid;
}

inline void check_husimi_coverage(const PhaseGrid& grid) {
  const double mass = grid.density.sum() * grid.cell_area() / 2.0;
  if (mass < 0.999) {
    std::ostringstream msg;
    msg << "husimi_q: grid captures only " << mass
        << " of the state; enlarge the grid";
    throw NumericsError(msg.str());
  }
}

}  // namespace detail

/// Husimi distribution of a pure state: Q = |<alpha|psi>|^2 / pi, evaluated
/// at cell centers with alpha = (q + i p)/sqrt(2). Normalized so that
/// sum Q dq dp / 2 = 1 (d^2alpha = dq dp / 2).
inline PhaseGrid husimi_q(const fock::StateVector& psi, double q_lo, double q_hi,
                          double p_lo, double p_hi, int resolution) {
  PhaseGrid grid = detail::make_grid(q_lo, q_hi, p_lo, p_hi, resolution);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < resolution; ++i) {
    Eigen::VectorXcd v(psi.amps.size());
    for (int j = 0; j < resolution; ++j) {
      const Complex alpha{grid.q_center(i) / kSqrt2, grid.p_center(j) / kSqrt2};
      detail::coherent_row(alpha, v);
      grid.density(i, j) = std::norm(v.dot(psi.amps)) / kPi;
    }
  }
  detail::check_husimi_coverage(grid);
  return grid;
}

/// Husimi distribution of a density matrix: Q = <alpha|rho|alpha> / pi.
inline PhaseGrid husimi_q(const open_system::DensityMatrix& s, double q_lo,
                          double q_hi, double p_lo, double p_hi, int resolution) {
  PhaseGrid grid = detail::make_grid(q_lo, q_hi, p_lo, p_hi, resolution);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < resolution; ++i) {
    Eigen::VectorXcd v(s.rho.rows());
    for (int j = 0; j < resolution; ++j) {
      const Complex alpha{grid.q_center(i) / kSqrt2, grid.p_center(j) / kSqrt2};
      detail::coherent_row(alpha, v);
      grid.density(i, j) = std::max(0.0, (v.dot(s.rho * v)).real() / kPi);
    }
  }
  detail::check_husimi_coverage(grid);
  return grid;
}

// ---------------------------------------------------------------------------
// Echo detection
// ---------------------------------------------------------------------------

enum class EchoKind { revival, kick_response, quantum_echo, classical_echo, fractional, unclassified };

struct EchoEvent {
  double time = 0.0;
  double amplitude = 0.0;
  double predicted_time = 0.0;
  EchoKind kind = EchoKind::unclassified;
  int order = 0;          // echo order l for quantum/classical, k for revivals
  int frac_num = 0;       // tau fraction for fractional echoes
  int frac_den = 1;

  std::string label() const {
    std::ostringstream os;
    switch (kind) {
      case EchoKind::revival: os << "revival(" << order << ")"; break;
      case EchoKind::kick_response: os << "kick_response"; break;
      case EchoKind::quantum_echo: os << "quantum_echo(" << order << ")"; break;
      case EchoKind::classical_echo: os << "classical_echo(" << order << ")"; break;
      case EchoKind::fractional:
        os << "fractional(" << frac_num << "/" << frac_den << ")";
        break;
      case EchoKind::unclassified: os << "unclassified"; break;
    }
    return os.str();
  }
};

struct EchoReport {
  std::vector<EchoEvent> events;
  double tau = 0.0;
  double t_rev = kPi;
  double collapse_time = 0.0;

  const EchoEvent* find(EchoKind kind, int order = 0) const {
    for (const auto& e : events)
      if (e.kind == kind && (order == 0 || e.order == order)) return &e;
    return nullptr;
  }
};

enum class Observable { q1, q2 };

struct DetectOptions {
  double prominence_frac = 0.05;  // of the global detrended-envelope maximum
  double env_window_factor = 3.0; // envelope window in units of t_c
  double t_rev = kPi;
  double match_window = 0.0;      // 0: max(0.03, t_c)
  int max_order = 4;
};

namespace detail {

inline std::vector<double> median_filter(const std::vector<double>& x, int half) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(n);
  std::vector<double> scratch;
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    scratch.assign(x.begin() + lo, x.begin() + hi + 1);
    const auto mid = scratch.begin() + scratch.size() / 2;
    std::nth_element(scratch.begin(), mid, scratch.end());
    out[i] = *mid;
  }
  return out;
}

inline std::vector<double> sliding_max(const std::vector<double>& x, int half) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(n);
  std::deque<int> dq;
  int right = -1;
  for (int i = 0; i < n; ++i) {
    while (right < std::min(n - 1, i + half)) {
      ++right;
      while (!dq.empty() && x[dq.back()] <= x[right]) dq.pop_back();
      dq.push_back(right);
    }
    while (dq.front() < i - half) dq.pop_front();
    out[i] = x[dq.front()];
  }
  return out;
}

struct Peak {
  int index;
  double value;
};

/// Plateau-aware local maxima: the sliding max flattens every bump top into
/// an exactly-constant run, whose midpoint recovers the bump center.
inline std::vector<Peak> plateau_peaks(const std::vector<double>& env) {
  std::vector<Peak> peaks;
  const int n = static_cast<int>(env.size());
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && env[j + 1] == env[i]) ++j;
    const bool up = i == 0 || env[i - 1] < env[i];
    const bool down = j == n - 1 || env[j + 1] < env[i];
    if (up && down && env[i] > 0.0) peaks.push_back({(i + j) / 2, env[i]});
    i = j + 1;
  }
  return peaks;
}

struct Candidate {
  double time;
  EchoKind kind;
  int order;
  int frac_num;
  int frac_den;
};

inline std::vector<Candidate> candidate_times(std::optional<double> tau,
                                              Observable obs, double t_lo,
                                              double t_hi, double t_rev,
                                              int max_order) {
  std::vector<Candidate> cs;
  auto add = [&](double t, EchoKind kind, int order, int fn = 0, int fd = 1) {
    if (t >= t_lo - 1e-9 && t <= t_hi + 1e-9)
      cs.push_back({t, kind, order, fn, fd});
  };
  for (int k = 0; k * t_rev <= t_hi + t_rev; ++k)
    add(k * t_rev, EchoKind::revival, k);
  if (obs == Observable::q2)
    for (int m = 1; m * t_rev / 2 <= t_hi + t_rev; m += 2)
      add(m * t_rev / 2.0, EchoKind::revival, m);  // half revivals of <q^2>
  if (tau) {
    const double tk = *tau;
    add(tk, EchoKind::kick_response, 0);
    for (int l = 1; l <= max_order; ++l) add((l + 1) * tk, EchoKind::classical_echo, l);
    for (int k = 1; k * t_rev - tk <= t_hi + t_rev; ++k)
      for (int l = 1; l <= max_order; ++l) {
        const double t = k * t_rev - l * tk;
        if (t > tk + 1e-9) add(t, EchoKind::quantum_echo, l);
      }
    if (obs == Observable::q2) {
      for (int m = 1; m * t_rev / 2 - tk <= t_hi + t_rev; ++m) {
        const double anchor = m * t_rev / 2.0;
        if (anchor - tk / 2 > tk + 1e-9)
          add(anchor - tk / 2, EchoKind::fractional, 0, 1, 2);
        add(anchor + tk / 2, EchoKind::fractional, 0, 1, 2);
        if (m % 2 == 1 && anchor - tk > tk + 1e-9)
          add(anchor - tk, EchoKind::fractional, 0, 1, 2);
      }
      for (int l = 1; l <= max_order; ++l)
        add((2 * l + 1) * tk / 2.0, EchoKind::fractional, l, 2 * l + 1, 2);
    }
  }
  std::sort(cs.begin(), cs.end(),
            [](const Candidate& a, const Candidate& b) { return a.time < b.time; });
  return cs;
}

}  // namespace detail

/// Sliding-window envelope of |observable - baseline|, prominent-peak search,
/// and classification against the predicted echo/revival times. Pass tau as
/// nullopt for unkicked series (revival candidates only).
inline EchoReport detect_echoes(const TimeSeries& series, std::optional<double> tau,
                                double alpha0, Observable obs,
                                const DetectOptions& opts = {}) {
  const std::size_t n = series.size();
  if (n < 16) throw std::invalid_argument("detect_echoes: series too short");
  if (tau && *tau <= 0.0)
    throw std::invalid_argument("detect_echoes: no kick time provided");
  if (alpha0 == 0.0)
    throw std::invalid_argument("detect_echoes: alpha0 must be nonzero");

  const double dt = (series.times.back() - series.times.front()) / (n - 1);
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(series.times[i] - series.times[i - 1] - dt) > 1e-9)
      throw std::invalid_argument("detect_echoes: non-uniform time grid");

  const double t_c = 1.0 / (2.0 * std::abs(alpha0));
  const double t_c_eff = obs == Observable::q1 ? t_c : 0.5 * t_c;
  if (dt > t_c / 20.0 + 1e-15)
    throw NumericsError("detect_echoes: undersampled series (need >= 20 points per t_c)");

  const std::vector<double>& raw = obs == Observable::q1 ? series.q1 : series.q2;
  const int base_half = std::max(1, static_cast<int>(std::lround(opts.t_rev / 8.0 / dt)));
  const auto baseline = detail::median_filter(raw, base_half);

  std::vector<double> detr(n);
  for (std::size_t i = 0; i < n; ++i) detr[i] = std::abs(raw[i] - baseline[i]);

  const int env_half = std::max(
      1, static_cast<int>(std::lround(opts.env_window_factor * t_c_eff / 2.0 / dt)));
  const auto env = detail::sliding_max(detr, env_half);

  const double peak_floor =
      opts.prominence_frac * *std::max_element(env.begin(), env.end());
  auto peaks = detail::plateau_peaks(env);

  const double match_window =
      opts.match_window > 0.0 ? opts.match_window : std::max(0.03, t_c);
  const auto candidates =
      detail::candidate_times(tau, obs, series.times.front(), series.times.back(),
                              opts.t_rev, opts.max_order);

  EchoReport report;
  report.tau = tau.value_or(0.0);
  report.t_rev = opts.t_rev;
  report.collapse_time = t_c;

  for (const auto& pk : peaks) {
    if (pk.value < peak_floor) continue;
    EchoEvent ev;
    ev.time = series.times[pk.index];
    ev.amplitude = pk.value;
    const detail::Candidate* best = nullptr;
    double best_dist = match_window;
    for (const auto& c : candidates) {
      const double d = std::abs(c.time - ev.time);
      if (d <= best_dist) {
        best_dist = d;
        best = &c;
      }
    }
    if (best != nullptr) {
      ev.kind = best->kind;
      ev.order = best->order;
      ev.frac_num = best->frac_num;
      ev.frac_den = best->frac_den;
      ev.predicted_time = best->time;
    } else {
      ev.kind = EchoKind::unclassified;
      ev.predicted_time = ev.time;
    }
    report.events.push_back(ev);
  }
  return report;
}

/// Detrended-envelope amplitude around a predicted echo time; used by the
/// kick-strength scaling sweeps where small echoes sit below the detection
/// prominence threshold.
inline double echo_window_amplitude(const TimeSeries& series, Observable obs,
                                    double t_center, double half_width,
                                    double t_rev = kPi) {
  const std::size_t n = series.size();
  if (n < 4) throw std::invalid_argument("echo_window_amplitude: series too short");
  const double dt = (series.times.back() - series.times.front()) / (n - 1);
  const std::vector<double>& raw = obs == Observable::q1 ? series.q1 : series.q2;
  const int base_half = std::max(1, static_cast<int>(std::lround(t_rev / 8.0 / dt)));
  const auto baseline = detail::median_filter(raw, base_half);
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(series.times[i] - t_center) > half_width) continue;
    best = std::max(best, std::abs(raw[i] - baseline[i]));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Series comparison and fits
// ---------------------------------------------------------------------------

struct CompareMetrics {
  double linf = 0.0;
  double l2 = 0.0;  // root-mean-square difference on the common grid
  std::vector<double> window_ratios;
};

struct TimeWindow {
  double begin;
  double end;
};

/// Pointwise metrics between two series; b is linearly interpolated onto a's
/// grid over the overlapping time range.
inline CompareMetrics compare_series(const TimeSeries& a, const TimeSeries& b,
                                     const std::vector<TimeWindow>& windows = {},
                                     Observable obs = Observable::q1) {
  const auto& xa = obs == Observable::q1 ? a.q1 : a.q2;
  const auto& xb = obs == Observable::q1 ? b.q1 : b.q2;
  const double lo = std::max(a.times.front(), b.times.front());
  const double hi = std::min(a.times.back(), b.times.back());
  if (lo >= hi) throw std::invalid_argument("compare_series: disjoint time ranges");

  auto interp_b = [&](double t) {
    const auto it = std::lower_bound(b.times.begin(), b.times.end(), t);
    std::size_t j = it - b.times.begin();
    if (j == 0) return xb.front();
    if (j >= b.times.size()) return xb.back();
    const double w = (t - b.times[j - 1]) / (b.times[j] - b.times[j - 1]);
    return (1.0 - w) * xb[j - 1] + w * xb[j];
  };

  CompareMetrics m;
  double sq = 0.0;
  std::size_t count = 0;
  std::vector<double> wa(windows.size(), 0.0), wb(windows.size(), 0.0);
  for (std::size_t i = 0; i < a.times.size(); ++i) {
    const double t = a.times[i];
    if (t < lo - 1e-12 || t > hi + 1e-12) continue;
    const double d = std::abs(xa[i] - interp_b(t));
    m.linf = std::max(m.linf, d);
    sq += d * d;
    ++count;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      if (t < windows[w].begin || t > windows[w].end) continue;
      wa[w] = std::max(wa[w], std::abs(xa[i]));
      wb[w] = std::max(wb[w], std::abs(interp_b(t)));
    }
  }
  if (count == 0) throw std::invalid_argument("compare_series: no common samples");
  m.l2 = std::sqrt(sq / count);
  for (std::size_t w = 0; w < windows.size(); ++w)
    m.window_ratios.push_back(wa[w] > 0.0 ? wb[w] / wa[w] : 0.0);
  return m;
}

/// Gaussian collapse constant from the early-time decay of |q1| maxima:
/// ln A_k regressed against t_k^2, envelope exp(-t^2 / (2 t_c^2)).
inline double fit_collapse_time(const TimeSeries& series, double t_max) {
  std::vector<double> ts, ln_a;
  const auto& q = series.q1;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.times[i] > t_max) break;
    const double v = std::abs(q[i]);
    const bool left = i == 0 || v >= std::abs(q[i - 1]);
    const bool right = i + 1 >= series.size() || v >= std::abs(q[i + 1]);
    if (left && right && v > 0.0) {
      ts.push_back(series.times[i]);
      ln_a.push_back(std::log(v));
    }
  }
  if (ts.size() < 3)
    throw NumericsError("fit_collapse_time: too few envelope maxima in range");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double x = ts[i] * ts[i];
    sx += x;
    sy += ln_a[i];
    sxx += x * x;
    sxy += x * ln_a[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (slope >= 0.0) throw NumericsError("fit_collapse_time: envelope does not decay");
  return std::sqrt(-0.5 / slope);
}

/// Least-squares slope of ln(y) against ln(x).
inline double fit_loglog_slope(const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_loglog_slope: need matching xs/ys, size >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace kerrecho::analysis
