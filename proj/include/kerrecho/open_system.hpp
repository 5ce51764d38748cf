#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "kerrecho/dynamics.hpp"
#include "kerrecho/fock.hpp"
#include "kerrecho/types.hpp"

namespace kerrecho::open_system {

/// Reduced density matrix in the truncated Fock basis.
struct DensityMatrix {
  Eigen::MatrixXcd rho;
  double truncated_tail = 0.0;  // mass dropped when the state was built

  int n_max() const { return static_cast<int>(rho.rows()) - 1; }
  double trace() const { return rho.trace().real(); }
  double hermiticity_defect() const {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }
  double mean_occupation() const {
    double acc = 0.0;
    for (int n = 0; n < rho.rows(); ++n) acc += n * rho(n, n).real();
    return acc;
  }
};

/// Reservoir coupling: damping constant gamma and thermal occupation nbar.
struct BathParams {
  double gamma = 0.0;
  double nbar = 0.0;

  static BathParams with_nbar(double gamma, double nbar) {
    if (gamma < 0.0 || nbar < 0.0)
      throw std::invalid_argument("BathParams: gamma and nbar must be >= 0");
    return BathParams{gamma, nbar};
  }
  /// nbar from epsilon = hbar*omega/(kB*T) via the Bose-Einstein occupation.
  static BathParams with_epsilon(double gamma, double epsilon) {
    if (epsilon <= 0.0)
      throw std::invalid_argument("BathParams: epsilon must be > 0");
    return with_nbar(gamma, 1.0 / std::expm1(epsilon));
  }
};

inline DensityMatrix pure_density(const fock::StateVector& psi) {
  DensityMatrix s;
  s.rho = psi.amps * psi.amps.adjoint();
  return s;
}

inline DensityMatrix coherent_density(Complex alpha0, Truncation trunc) {
  return pure_density(fock::coherent_state(alpha0, trunc));
}

/// Diagonal Bose-Einstein mixture P_n = nbar^n/(1+nbar)^{n+1}, renormalized
/// to unit trace after truncation. Rejects truncations whose geometric tail
/// exceeds 1e-10.
inline DensityMatrix thermal_state(const BathParams& bath, Truncation trunc) {
  const int dim = trunc.n_max + 1;
  DensityMatrix s;
  s.rho = Eigen::MatrixXcd::Zero(dim, dim);
  if (bath.nbar == 0.0) {
    s.rho(0, 0) = 1.0;
    return s;
  }
  const double r = bath.nbar / (1.0 + bath.nbar);
  const double tail = std::pow(r, trunc.n_max + 1);
  if (tail > 1e-10) {
    std::ostringstream msg;
    msg << "thermal_state: tail mass " << tail << " beyond n_max=" << trunc.n_max
        << " rejected (nbar=" << bath.nbar << ")";
    throw TruncationError(msg.str());
  }
  const double log_r = std::log(r);
  const double log_p0 = -std::log1p(bath.nbar);
  for (int n = 0; n < dim; ++n) s.rho(n, n) = std::exp(log_p0 + n * log_r);
  s.rho /= s.rho.trace().real();
  s.truncated_tail = tail;
  return s;
}

namespace detail {

/// One evaluation of the master-equation right-hand side. The ladder
/// couplings arrive in `c` (c[n] couples levels n and n+1), so the same core
/// serves the plain Schroedinger-picture form (c[n] = sqrt(n+1)) and the
/// Kerr-interaction-picture form (phase-dressed couplings). Every operator
/// product is a band-limited shift-and-scale, O(n_max^2) total.
inline void rhs_apply(const Eigen::MatrixXcd& s, double drive, double gamma,
                      double nbar, const Eigen::VectorXcd& c,
                      const double* diag_energy, Eigen::MatrixXcd& out) {
  const int dim = static_cast<int>(s.rows());
  const Complex mi{0.0, -1.0};
  const bool thermal = gamma > 0.0 && nbar > 0.0;
  const bool damped = gamma > 0.0;

#pragma omp parallel for schedule(static) if (dim >= 96)
  for (int m = 0; m < dim; ++m) {
    for (int n = 0; n < dim; ++n) {
      Complex acc{0.0, 0.0};
      if (diag_energy != nullptr && n != m)
        acc += mi * (diag_energy[n] - diag_energy[m]) * s(n, m);
      if (drive != 0.0) {
        Complex comm{0.0, 0.0};
        if (n + 1 < dim) comm += c[n] * s(n + 1, m);
        if (n > 0) comm += std::conj(c[n - 1]) * s(n - 1, m);
        if (m > 0) comm -= s(n, m - 1) * c[m - 1];
        if (m + 1 < dim) comm -= s(n, m + 1) * std::conj(c[m]);
        acc += mi * drive * comm;
      }
      if (damped) {
        // a S a^dag, shared by both dissipator terms
        Complex asad{0.0, 0.0};
        if (n + 1 < dim && m + 1 < dim)
          asad = c[n] * std::conj(c[m]) * s(n + 1, m + 1);
        acc += gamma * (asad - 0.5 * (n + m) * s(n, m));
        if (thermal) {
          // [[a,S],a^dag] = aSa^dag - S aa^dag - a^dag a S + a^dag S a,
          // with the truncation-consistent diagonal aa^dag (0 in the top level)
          Complex t = asad;
          const double aad_m = (m + 1 < dim) ? m + 1.0 : 0.0;
          t -= aad_m * s(n, m);
          t -= static_cast<double>(n) * s(n, m);
          if (n > 0 && m > 0) t += std::conj(c[n - 1]) * c[m - 1] * s(n - 1, m - 1);
          acc += gamma * nbar * t;
        }
      }
      out(n, m) = acc;
    }
  }
}

inline void dressed_couplings(double t, double delta, Eigen::VectorXcd& c) {
  const auto m = c.size();
  const Complex step = std::exp(Complex{0.0, -2.0 * t});
  Complex ph = std::exp(Complex{0.0, -delta * t});
  for (int n = 0; n < m; ++n) {
    c[n] = std::sqrt(n + 1.0) * ph;
    ph *= step;
  }
}

}  // namespace detail

/// Right-hand side of the master equation exactly as written:
/// dS/dt = -i[H,S] + gamma nbar [[a,S],a^dag] + (gamma/2)(2aSa^dag - a^dag aS - Sa^dag a),
/// with H the Kerr Hamiltonian at the instantaneous drive amplitude.
inline DensityMatrix lindblad_rhs(const DensityMatrix& s, double pulse_amplitude_now,
                                  SystemParams params, const BathParams& bath) {
  const int dim = static_cast<int>(s.rho.rows());
  Eigen::VectorXcd c(dim > 1 ? dim - 1 : 1);
  for (int n = 0; n + 1 < dim; ++n) c[n] = std::sqrt(n + 1.0);
  std::vector<double> energies(dim);
  for (int n = 0; n < dim; ++n) energies[n] = dynamics::energy_level(n, params);
  DensityMatrix out;
  out.rho.resize(dim, dim);
  detail::rhs_apply(s.rho, pulse_amplitude_now, bath.gamma, bath.nbar, c,
                    energies.data(), out.rho);
  return out;
}

using DensityObserver = std::function<void(double t, const DensityMatrix&)>;

struct LindbladOptions {
  double dt_pulse = 1e-4;
  double dt_free = 5e-4;
  int positivity_stride = 0;  // 0: about 32 checks per run
  std::vector<double> observe_times;  // must coincide with sample times
  DensityObserver observer;
};

/// Fixed-step RK4 integration of the master equation in the interaction
/// picture of the diagonal Kerr part: the stiff n^2 phases never enter the
/// integrator, only the phase-dressed drive and dissipator do. Records
/// <q>, <q^2> and the trace; aborts on trace or Hermiticity drift.
inline TimeSeries propagate_lindblad(const DensityMatrix& s0,
                                     const std::vector<PulseSpec>& pulses,
                                     SystemParams params, const BathParams& bath,
                                     const std::vector<double>& sample_times,
                                     const LindbladOptions& opts = {}) {
  if (sample_times.empty() ||
      !std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument("propagate_lindblad: sample times must increase");
  if (opts.dt_pulse <= 0.0 || opts.dt_free <= 0.0)
    throw std::invalid_argument("propagate_lindblad: dt must be positive");

  const double t_start = sample_times.front();
  const int dim = static_cast<int>(s0.rho.rows());

  // Segment boundaries: samples plus pulse-window edges.
  std::vector<double> cuts(sample_times.begin(), sample_times.end());
  for (const auto& p : pulses) {
    if (p.sigma <= 0.0)
      throw std::invalid_argument("propagate_lindblad: pulse sigma must be positive");
    for (double e : {p.window_begin(), p.window_end()})
      if (e > t_start && e < sample_times.back()) cuts.push_back(e);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-12; }),
             cuts.end());

  auto drive_at = [&](double t) {
    double e = 0.0;
    for (const auto& p : pulses) e += p.e0 * p.envelope(t);
    return e;
  };
  auto in_pulse_window = [&](double t) {
    for (const auto& p : pulses)
      if (t >= p.window_begin() - 1e-12 && t <= p.window_end() + 1e-12) return true;
    return false;
  };

  TimeSeries ts;
  ts.times = sample_times;

  Eigen::MatrixXcd sigma = s0.rho;  // interaction picture, reference t_start
  Eigen::MatrixXcd k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim),
      tmp(dim, dim);
  Eigen::VectorXcd c(dim > 1 ? dim - 1 : 1);

  const double trace0 = sigma.trace().real();
  int stride = opts.positivity_stride;
  if (stride <= 0)
    stride = std::max<int>(1, static_cast<int>(sample_times.size()) / 32);

  auto rhs = [&](const Eigen::MatrixXcd& in, double t_abs, Eigen::MatrixXcd& out) {
    detail::dressed_couplings(t_abs - t_start, params.delta, c);
    detail::rhs_apply(in, drive_at(t_abs), bath.gamma, bath.nbar, c, nullptr, out);
  };

  double cursor = t_start;
  std::size_t sample_idx = 0;
  std::size_t observe_idx = 0;

  auto record = [&](double t) {
    detail::dressed_couplings(t - t_start, params.delta, c);
    Complex ea{0.0, 0.0}, ea2{0.0, 0.0};
    double occ = 0.0;
    for (int n = 0; n + 1 < dim; ++n) ea += c[n] * sigma(n + 1, n);
    for (int n = 0; n + 2 < dim; ++n) ea2 += c[n] * c[n + 1] * sigma(n + 2, n);
    for (int n = 0; n < dim; ++n) occ += n * sigma(n, n).real();
    ts.q1.push_back(kSqrt2 * ea.real());
    ts.q2.push_back(ea2.real() + occ + 0.5);
    const double trace = sigma.trace().real();
    ts.norm_or_trace.push_back(trace);

    const double trace_drift = std::abs(trace - trace0);
    const double herm = (sigma - sigma.adjoint()).cwiseAbs().maxCoeff();
    if (trace_drift > 1e-6 || herm > 1e-8) {
      std::ostringstream msg;
      msg << "propagate_lindblad: integrity failure at t=" << t
          << " (trace drift " << trace_drift << ", hermiticity " << herm << ")";
      throw NumericsError(msg.str());
    }
    if (sample_idx % stride == 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
          0.5 * (sigma + sigma.adjoint()), Eigen::EigenvaluesOnly);
      const double lam = es.eigenvalues().minCoeff();
      if (lam < -1e-8) {
        std::ostringstream msg;
        msg << "propagate_lindblad: negative eigenvalue " << lam << " at t=" << t;
        throw NumericsError(msg.str());
      }
    }
    if (opts.observer && observe_idx < opts.observe_times.size() &&
        std::abs(opts.observe_times[observe_idx] - t) < 1e-12) {
      // Hand the observer the Schroedinger-picture matrix.
      DensityMatrix snap;
      snap.rho.resize(dim, dim);
      Eigen::VectorXcd u(dim);
      for (int n = 0; n < dim; ++n)
        u[n] = std::exp(
            Complex{0.0, -dynamics::energy_level(n, params) * (t - t_start)});
      for (int mm = 0; mm < dim; ++mm)
        for (int nn = 0; nn < dim; ++nn)
          snap.rho(nn, mm) = u[nn] * sigma(nn, mm) * std::conj(u[mm]);
      opts.observer(t, snap);
      ++observe_idx;
    }
  };

  auto integrate_to = [&](double t_end) {
    if (t_end <= cursor) return;
    const double dt = in_pulse_window(0.5 * (cursor + t_end)) ? opts.dt_pulse
                                                              : opts.dt_free;
    const int m = std::max(1, static_cast<int>(std::ceil((t_end - cursor) / dt - 1e-12)));
    const double h = (t_end - cursor) / m;
    for (int i = 0; i < m; ++i) {
      const double t = cursor + i * h;
      rhs(sigma, t, k1);
      tmp = sigma + (0.5 * h) * k1;
      rhs(tmp, t + 0.5 * h, k2);
      tmp = sigma + (0.5 * h) * k2;
      rhs(tmp, t + 0.5 * h, k3);
      tmp = sigma + h * k3;
      rhs(tmp, t + h, k4);
      sigma += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    cursor = t_end;
  };

  for (double cut : cuts) {
    integrate_to(cut);
    while (sample_idx < sample_times.size() &&
           std::abs(sample_times[sample_idx] - cut) < 1e-12) {
      record(cut);
      ++sample_idx;
    }
  }
  return ts;
}

}  // namespace kerrecho::open_system
