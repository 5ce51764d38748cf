#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "kerrecho/types.hpp"

namespace kerrecho::classical {

/// Monte Carlo ensemble of classical Kerr oscillators.
struct Ensemble {
  std::vector<double> q;
  std::vector<double> p;
  std::uint64_t seed = 0;
  double t = 0.0;

  std::size_t size() const { return q.size(); }
};

namespace detail {

inline double uniform_open(std::mt19937_64& rng) {
  // (0, 1], 53-bit mantissa; keeps log() finite.
  return ((rng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform_half_open(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

/// Box-Muller pair of standard normal variates.
inline std::pair<double, double> normal_pair(std::mt19937_64& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_half_open(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
}

/// Deterministic pairwise reduction, independent of thread count.
template <typename F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& value) {
  if (hi - lo <= 32) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += value(i);
    return acc;
  }
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(lo, mid, value) + pairwise_sum(mid, hi, value);
}

}  // namespace detail

/// Gaussian cloud equivalent to the coherent state |alpha0>: centered at
/// (sqrt(2) alpha0, 0) with sigma_q = sigma_p = 1/sqrt(2). Deterministic
/// for a given seed (mt19937_64 + Box-Muller).
inline Ensemble sample_initial_ensemble(double alpha0, int n_particles,
                                        std::uint64_t seed) {
  if (n_particles < 1)
    throw std::invalid_argument("sample_initial_ensemble: need n_particles >= 1");
  Ensemble ens;
  ens.seed = seed;
  ens.q.resize(n_particles);
  ens.p.resize(n_particles);
  std::mt19937_64 rng(seed);
  const double q0 = kSqrt2 * alpha0;
  const double sigma = 1.0 / kSqrt2;
  for (int i = 0; i < n_particles; ++i) {
    const auto [z0, z1] = detail::normal_pair(rng);
    ens.q[i] = q0 + sigma * z0;
    ens.p[i] = sigma * z1;
  }
  return ens;
}

/// Drive-free classical energy H = Delta/2 r^2 + r^4/4.
inline double hamiltonian_energy(double q, double p, double delta) {
  const double r2 = q * q + p * p;
  return 0.5 * delta * r2 + 0.25 * r2 * r2;
}

struct EvolveOptions {
  double dt = 1e-4;
  std::vector<double> snapshot_times;  // must coincide with sample times
};

struct ClassicalRun {
  TimeSeries series;
  std::vector<Ensemble> snapshots;
};

namespace detail {

struct StageDrive {
  double h;
  double e_begin;   // sqrt(2) * E(t)
  double e_mid;     // sqrt(2) * E(t + h/2)
  double e_end;     // sqrt(2) * E(t + h)
};

inline double drive_at(const std::vector<PulseSpec>& pulses, double t) {
  double e = 0.0;
  for (const auto& p : pulses) e += p.e0 * p.envelope(t);
  return kSqrt2 * e;
}

/// RK4 sweep of one particle block over a precomputed step list.
inline void integrate_block(std::vector<double>& q, std::vector<double>& p,
                            std::size_t lo, std::size_t hi, double delta,
                            const std::vector<StageDrive>& steps) {
  for (const auto& st : steps) {
    const double h = st.h;
    for (std::size_t i = lo; i < hi; ++i) {
      double x = q[i], y = p[i];
      auto deriv = [delta](double qq, double pp, double e, double& dq, double& dp) {
        const double w = delta + qq * qq + pp * pp;
        dq = pp * w;
        dp = -qq * w - e;
      };
      double k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p;
      deriv(x, y, st.e_begin, k1q, k1p);
      deriv(x + 0.5 * h * k1q, y + 0.5 * h * k1p, st.e_mid, k2q, k2p);
      deriv(x + 0.5 * h * k2q, y + 0.5 * h * k2p, st.e_mid, k3q, k3p);
      deriv(x + h * k3q, y + h * k3p, st.e_end, k4q, k4p);
      q[i] = x + h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      p[i] = y + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    }
  }
}

}  // namespace detail

/// Integrates Hamilton's equations  qdot = Delta p + p(q^2+p^2),
/// pdot = -Delta q - q(q^2+p^2) - sqrt(2) E0 f(t)  for every particle with
/// classical RK4, recording ensemble <q>, <q^2> and their standard errors at
/// each sample time. Instantaneous kicks enter as momentum shifts sqrt(2)*lambda.
/// Particles integrate in parallel; averages use a fixed pairwise reduction
/// so results do not depend on the thread count.
inline ClassicalRun evolve_ensemble(const Ensemble& initial,
                                    const std::vector<Excitation>& pulses,
                                    SystemParams params,
                                    const std::vector<double>& sample_times,
                                    const EvolveOptions& opts = {}) {
  if (opts.dt <= 0.0) throw std::invalid_argument("evolve_ensemble: dt must be positive");
  if (sample_times.empty() ||
      !std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument("evolve_ensemble: sample times must be increasing");
  if (sample_times.front() < initial.t)
    throw std::invalid_argument("evolve_ensemble: samples precede ensemble time");

  std::vector<PulseSpec> gauss;
  std::vector<KickSpec> kicks;
  for (const auto& ex : pulses) {
    if (const auto* p = std::get_if<PulseSpec>(&ex)) gauss.push_back(*p);
    else kicks.push_back(std::get<KickSpec>(ex));
  }
  std::sort(kicks.begin(), kicks.end(),
            [](const KickSpec& a, const KickSpec& b) { return a.center < b.center; });

  Ensemble ens = initial;
  const std::size_t n = ens.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  ClassicalRun run;
  run.series.times = sample_times;

  // Event timeline: sample times plus kick instants.
  struct Event {
    double t;
    int kind;  // 0 = sample, 1 = kick
    std::size_t idx;
  };
  std::vector<Event> events;
  for (std::size_t i = 0; i < sample_times.size(); ++i)
    events.push_back({sample_times[i], 0, i});
  for (std::size_t i = 0; i < kicks.size(); ++i)
    if (kicks[i].center > ens.t) events.push_back({kicks[i].center, 1, i});
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) {
                     if (a.t != b.t) return a.t < b.t;
                     return a.kind > b.kind;  // kick before a sample at the same instant
                   });

  constexpr std::size_t kBlock = 4096;
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;

  auto integrate_to = [&](double t_end) {
    if (t_end <= ens.t) return;
    const double span = t_end - ens.t;
    const int m = std::max(1, static_cast<int>(std::ceil(span / opts.dt - 1e-12)));
    const double h = span / m;
    std::vector<detail::StageDrive> steps(m);
    for (int i = 0; i < m; ++i) {
      const double t = ens.t + i * h;
      steps[i] = {h, detail::drive_at(gauss, t), detail::drive_at(gauss, t + 0.5 * h),
                  detail::drive_at(gauss, t + h)};
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
      const std::size_t lo = b * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      detail::integrate_block(ens.q, ens.p, lo, hi, params.delta, steps);
    }
    ens.t = t_end;
  };

  auto record_sample = [&]() {
    const auto& q = ens.q;
    const double s1 = detail::pairwise_sum(0, n, [&](std::size_t i) { return q[i]; });
    const double s2 =
        detail::pairwise_sum(0, n, [&](std::size_t i) { return q[i] * q[i]; });
    const double s4 = detail::pairwise_sum(
        0, n, [&](std::size_t i) { return q[i] * q[i] * q[i] * q[i]; });
    for (double v : {s1, s2, s4})
      if (!std::isfinite(v))
        throw NumericsError("evolve_ensemble: non-finite coordinates, dt too large");
    const double m1 = s1 * inv_n;
    const double m2 = s2 * inv_n;
    const double m4 = s4 * inv_n;
    run.series.q1.push_back(m1);
    run.series.q2.push_back(m2);
    run.series.norm_or_trace.push_back(1.0);
    run.series.q1_se.push_back(std::sqrt(std::max(0.0, m2 - m1 * m1) * inv_n));
    run.series.q2_se.push_back(std::sqrt(std::max(0.0, m4 - m2 * m2) * inv_n));
  };

  std::size_t snap_idx = 0;
  for (const auto& ev : events) {
    integrate_to(ev.t);
    if (ev.kind == 1) {
      const double dp = kSqrt2 * kicks[ev.idx].lambda;
      for (auto& pv : ens.p) pv += dp;
    } else {
      record_sample();
      while (snap_idx < opts.snapshot_times.size() &&
             std::abs(opts.snapshot_times[snap_idx] - ev.t) < 1e-12) {
        run.snapshots.push_back(ens);
        ++snap_idx;
      }
    }
  }
  return run;
}

/// Normalized 2-D phase-space density on a rectangular grid.
struct PhaseGrid {
  std::vector<double> q_edges;
  std::vector<double> p_edges;
  Eigen::MatrixXd density;  // rows: q bins, cols: p bins
  double t = 0.0;

  double cell_area() const {
    return (q_edges[1] - q_edges[0]) * (p_edges[1] - p_edges[0]);
  }
  double q_center(int i) const { return 0.5 * (q_edges[i] + q_edges[i + 1]); }
  double p_center(int j) const { return 0.5 * (p_edges[j] + p_edges[j + 1]); }
};

inline PhaseGrid phase_space_histogram(const Ensemble& ens, double q_lo,
                                       double q_hi, double p_lo, double p_hi,
                                       int bins) {
  if (bins < 2) throw std::invalid_argument("phase_space_histogram: bins >= 2");
  PhaseGrid grid;
  grid.t = ens.t;
  grid.q_edges.resize(bins + 1);
  grid.p_edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) {
    grid.q_edges[i] = q_lo + (q_hi - q_lo) * i / bins;
    grid.p_edges[i] = p_lo + (p_hi - p_lo) * i / bins;
  }
  grid.density = Eigen::MatrixXd::Zero(bins, bins);
  const double dq = (q_hi - q_lo) / bins;
  const double dp = (p_hi - p_lo) / bins;
  std::size_t inside = 0;
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const int iq = static_cast<int>(std::floor((ens.q[k] - q_lo) / dq));
    const int ip = static_cast<int>(std::floor((ens.p[k] - p_lo) / dp));
    if (iq < 0 || iq >= bins || ip < 0 || ip >= bins) continue;
    grid.density(iq, ip) += 1.0;
    ++inside;
  }
  if (inside > 0) grid.density /= static_cast<double>(inside) * dq * dp;
  return grid;
}

/// Contrast (max-min)/(max+min) of the angular mass histogram inside the
/// annulus r_lo <= r <= r_hi; the bunch-synchronization scalar.
inline double angular_contrast(const PhaseGrid& grid, double r_lo, double r_hi,
                               int angular_bins = 64) {
  std::vector<double> mass(angular_bins, 0.0);
  const int nq = static_cast<int>(grid.q_edges.size()) - 1;
  const int np = static_cast<int>(grid.p_edges.size()) - 1;
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < np; ++j) {
      const double x = grid.q_center(i);
      const double y = grid.p_center(j);
      const double r = std::hypot(x, y);
      if (r < r_lo || r > r_hi) continue;
      const double ang = std::atan2(y, x);  // [-pi, pi]
      int bin = static_cast<int>((ang + kPi) / (2.0 * kPi) * angular_bins);
      bin = std::clamp(bin, 0, angular_bins - 1);
      mass[bin] += grid.density(i, j);
    }
  }
  const auto [lo, hi] = std::minmax_element(mass.begin(), mass.end());
  if (*hi + *lo <= 0.0) return 0.0;
  return (*hi - *lo) / (*hi + *lo);
}

}  // namespace kerrecho::classical
