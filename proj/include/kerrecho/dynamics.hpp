#pragma once

#include <algorithm>
#include <functional>
#include <sstream>

#include "kerrecho/fock.hpp"
#include "kerrecho/types.hpp"

namespace kerrecho::dynamics {

using fock::StateVector;

/// E_n = (Delta - 1) n + n^2, the rotated-frame Kerr spectrum.
inline double energy_level(int n, SystemParams params) {
  return (params.delta - 1.0) * n + static_cast<double>(n) * n;
}

/// Exact free propagation: amplitudes pick up exp(-i E_n duration).
inline StateVector free_propagate(const StateVector& s, double duration,
                                  SystemParams params) {
  StateVector out;
  out.amps.resize(s.amps.size());
  for (int n = 0; n < s.amps.size(); ++n)
    out.amps[n] =
        s.amps[n] * std::exp(Complex{0.0, -energy_level(n, params) * duration});
  return out;
}

namespace detail {

/// Interaction-picture couplings d_n(s) = sqrt(n+1) exp(-i (Delta + 2n) s),
/// built by phase recurrence (one exp per call).
inline void coupling_phases(double s, double delta, Eigen::VectorXcd& d) {
  const auto m = d.size();
  const Complex step = std::exp(Complex{0.0, -2.0 * s});
  Complex ph = std::exp(Complex{0.0, -delta * s});
  for (int n = 0; n < m; ++n) {
    d[n] = std::sqrt(n + 1.0) * ph;
    ph *= step;
  }
}

/// y = -i e (a_I + a_I^dag) phi with the couplings in d.
inline void drive_apply(const Eigen::VectorXcd& phi, const Eigen::VectorXcd& d,
                        double e, Eigen::VectorXcd& y) {
  const auto dim = phi.size();
  const Complex mi{0.0, -1.0};
  for (int n = 0; n < dim; ++n) {
    Complex acc{0.0, 0.0};
    if (n + 1 < dim) acc += d[n] * phi[n + 1];
    if (n > 0) acc += std::conj(d[n - 1]) * phi[n - 1];
    y[n] = mi * e * acc;
  }
}

}  // namespace detail

/// Step size resolving the Gaussian envelope with ample margin.
inline double default_pulse_dt(const PulseSpec& pulse, double t0, double t1) {
  return std::min(pulse.sigma / 50.0, (t1 - t0) / 200.0);
}

/// Integrates the driven Schroedinger equation over [t0, t1] in the
/// interaction picture of the diagonal Kerr part: the stiff n^2 phases are
/// applied exactly and only the drive term is stepped with classical RK4.
inline StateVector propagate_driven(const StateVector& s, const PulseSpec& pulse,
                                    double t0, double t1, SystemParams params,
                                    double dt = 0.0) {
  if (!(t0 < t1)) throw std::invalid_argument("propagate_driven: need t0 < t1");
  if (pulse.sigma <= 0.0)
    throw std::invalid_argument("propagate_driven: pulse sigma must be positive");
  if (dt <= 0.0) dt = default_pulse_dt(pulse, t0, t1);

  const auto dim = s.amps.size();
  const int steps = std::max(1, static_cast<int>(std::ceil((t1 - t0) / dt)));
  const double h = (t1 - t0) / steps;

  Eigen::VectorXcd phi = s.amps;
  Eigen::VectorXcd d(dim), k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  const double norm_in = phi.norm();

  for (int i = 0; i < steps; ++i) {
    const double rel = i * h;           // time since t0
    const double t = t0 + rel;
    const double e0 = pulse.e0 * pulse.envelope(t);
    const double em = pulse.e0 * pulse.envelope(t + 0.5 * h);
    const double e1 = pulse.e0 * pulse.envelope(t + h);

    detail::coupling_phases(rel, params.delta, d);
    detail::drive_apply(phi, d, e0, k1);
    detail::coupling_phases(rel + 0.5 * h, params.delta, d);
    tmp = phi + (0.5 * h) * k1;
    detail::drive_apply(tmp, d, em, k2);
    tmp = phi + (0.5 * h) * k2;
    detail::drive_apply(tmp, d, em, k3);
    detail::coupling_phases(rel + h, params.delta, d);
    tmp = phi + h * k3;
    detail::drive_apply(tmp, d, e1, k4);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  const double drift = std::abs(phi.norm() - norm_in);
  if (drift > 1e-6) {
    std::ostringstream msg;
    msg << "propagate_driven: norm drift " << drift
        << " exceeds 1e-6; dt too large or truncation too small";
    throw NumericsError(msg.str());
  }

  // Leave the interaction picture: apply the exact diagonal phases.
  StateVector out;
  out.amps = phi;
  return free_propagate(out, t1 - t0, params);
}

using SampleObserver = std::function<void(double t, const StateVector&)>;

struct ScenarioOptions {
  double dt_pulse = 0.0;  // 0 = per-pulse default
  SampleObserver observer;
};

namespace detail {

struct Window {
  double begin = 0.0;
  double end = 0.0;
  const PulseSpec* pulse = nullptr;  // null for instantaneous kicks
  const KickSpec* kick = nullptr;
};

inline std::vector<Window> build_windows(const std::vector<Excitation>& pulses,
                                         double t_start) {
  std::vector<Window> ws;
  for (const auto& ex : pulses) {
    Window w;
    if (const auto* p = std::get_if<PulseSpec>(&ex)) {
      if (p->sigma <= 0.0)
        throw std::invalid_argument("kicked scenario: pulse sigma must be positive");
      if (p->window_end() <= t_start) continue;  // entirely before the run
      w = Window{std::max(p->window_begin(), t_start), p->window_end(), p, nullptr};
    } else {
      const auto* k = &std::get<KickSpec>(ex);
      if (k->center < t_start) continue;
      w = Window{k->center, k->center, nullptr, k};
    }
    ws.push_back(w);
  }
  std::sort(ws.begin(), ws.end(),
            [](const Window& a, const Window& b) { return a.begin < b.begin; });
  for (std::size_t i = 1; i < ws.size(); ++i)
    if (ws[i].begin < ws[i - 1].end)
      throw std::invalid_argument("kicked scenario: overlapping pulse windows rejected");
  return ws;
}

}  // namespace detail

/// Kicked-scenario run: exact free segments between pulse windows, RK4 inside
/// them, displacement applications for instantaneous kicks. Records <q>, <q^2>
/// and the norm at each sample time. Evolution starts at sample_times.front().
inline TimeSeries run_kicked_scenario(const StateVector& initial,
                                      const std::vector<Excitation>& pulses,
                                      SystemParams params,
                                      const std::vector<double>& sample_times,
                                      const ScenarioOptions& opts = {}) {
  if (sample_times.empty())
    throw std::invalid_argument("run_kicked_scenario: no sample times");
  if (!std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument("run_kicked_scenario: sample times must increase");

  const double t_start = sample_times.front();
  auto windows = detail::build_windows(pulses, t_start);

  TimeSeries ts;
  ts.times = sample_times;
  ts.q1.reserve(sample_times.size());
  ts.q2.reserve(sample_times.size());
  ts.norm_or_trace.reserve(sample_times.size());

  StateVector state = initial;  // state at time `cursor`
  double cursor = t_start;
  std::size_t wi = 0;

  auto record = [&](double t, const StateVector& s) {
    ts.q1.push_back(fock::expect_q_moment(s, 1));
    ts.q2.push_back(fock::expect_q_moment(s, 2));
    ts.norm_or_trace.push_back(s.norm());
    if (opts.observer) opts.observer(t, s);
  };

  // Advance `state` from `cursor` to t, crossing any intervening windows.
  // Windows advance (wi) only once consumed, so a zero-width kick window is
  // never skipped when a sample lands exactly on its center.
  auto advance_to = [&](double t) {
    while (true) {
      const bool window_ahead = wi < windows.size() && windows[wi].begin < t;
      if (!window_ahead) {
        if (t > cursor) {
          state = free_propagate(state, t - cursor, params);
          cursor = t;
        }
        return;
      }
      const auto& w = windows[wi];
      if (w.begin > cursor) {
        state = free_propagate(state, w.begin - cursor, params);
        cursor = w.begin;
      }
      if (w.kick) {
        state = fock::apply_displacement(state, w.kick->beta());
        ++wi;
      } else {
        const double stop = std::min(t, w.end);
        if (stop > cursor) {
          const double dt = opts.dt_pulse > 0.0
                                ? opts.dt_pulse
                                : default_pulse_dt(*w.pulse, w.begin, w.end);
          state = propagate_driven(state, *w.pulse, cursor, stop, params, dt);
          cursor = stop;
        }
        if (cursor >= w.end) ++wi;
        if (cursor >= t) return;
      }
    }
  };

  for (double t : sample_times) {
    advance_to(t);
    record(t, state);
  }
  return ts;
}

}  // namespace kerrecho::dynamics
