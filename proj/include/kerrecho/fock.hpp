#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

#include "kerrecho/types.hpp"

namespace kerrecho::fock {

/// Pure state in the truncated Fock basis, amplitudes indexed n = 0..n_max.
struct StateVector {
  Eigen::VectorXcd amps;

  int n_max() const { return static_cast<int>(amps.size()) - 1; }
  double norm() const { return amps.norm(); }
};

inline StateVector number_state(int n, Truncation trunc) {
  if (n < 0 || n > trunc.n_max)
    throw std::invalid_argument("number_state: level outside truncation");
  StateVector s;
  s.amps = Eigen::VectorXcd::Zero(trunc.n_max + 1);
  s.amps[n] = 1.0;
  return s;
}

/// Occupation mass in the top `last_levels` kept levels; a proxy for how
/// close the state sits to the truncation boundary.
inline double tail_mass(const StateVector& s, int last_levels = 5) {
  const int n = static_cast<int>(s.amps.size());
  const int k = std::min(last_levels, n);
  return s.amps.tail(k).squaredNorm();
}

/// Coherent state |alpha0> with amplitudes exp(-|a|^2/2) a^n / sqrt(n!),
/// evaluated in log space so large n_max does not overflow n!.
inline StateVector coherent_state(Complex alpha0, Truncation trunc) {
  StateVector s;
  s.amps = Eigen::VectorXcd::Zero(trunc.n_max + 1);
  if (alpha0 == Complex{0.0, 0.0}) {
    s.amps[0] = 1.0;
    return s;
  }
  const double log_mag = std::log(std::abs(alpha0));
  const double phase = std::arg(alpha0);
  const double a2 = std::norm(alpha0);
  for (int n = 0; n <= trunc.n_max; ++n) {
    const double log_amp = n * log_mag - 0.5 * a2 - 0.5 * std::lgamma(n + 1.0);
    s.amps[n] = std::polar(std::exp(log_amp), n * phase);
  }
  const double missing = std::abs(1.0 - s.amps.squaredNorm());
  if (missing > trunc.tail_tolerance) {
    std::ostringstream msg;
    msg << "coherent_state: truncated mass " << missing << " exceeds tolerance "
        << trunc.tail_tolerance << " (|alpha0|=" << std::abs(alpha0)
        << ", n_max=" << trunc.n_max << ")";
    throw TruncationError(msg.str());
  }
  return s;
}

inline Complex overlap(const StateVector& a, const StateVector& b) {
  if (a.amps.size() != b.amps.size())
    throw std::invalid_argument("overlap: dimension mismatch");
  return a.amps.dot(b.amps);  // Eigen's dot conjugates the left argument
}

inline StateVector apply_annihilation(const StateVector& s) {
  StateVector out;
  out.amps = Eigen::VectorXcd::Zero(s.amps.size());
  for (int n = 1; n < s.amps.size(); ++n)
    out.amps[n - 1] = std::sqrt(static_cast<double>(n)) * s.amps[n];
  return out;
}

inline StateVector apply_creation(const StateVector& s) {
  StateVector out;
  out.amps = Eigen::VectorXcd::Zero(s.amps.size());
  for (int n = 0; n + 1 < s.amps.size(); ++n)
    out.amps[n + 1] = std::sqrt(n + 1.0) * s.amps[n];
  return out;
}

/// <a>, from the sqrt(n+1) ladder couplings.
inline Complex expect_annihilation(const StateVector& s) {
  Complex acc{0.0, 0.0};
  for (int n = 0; n + 1 < s.amps.size(); ++n)
    acc += std::conj(s.amps[n]) * std::sqrt(n + 1.0) * s.amps[n + 1];
  return acc;
}

/// <a^dag a>, integer matrix elements.
inline double mean_occupation(const StateVector& s) {
  double acc = 0.0;
  for (int n = 0; n < s.amps.size(); ++n) acc += n * std::norm(s.amps[n]);
  return acc;
}

namespace detail {
inline StateVector apply_q(const StateVector& s) {
  StateVector up = apply_creation(s);
  StateVector down = apply_annihilation(s);
  StateVector out;
  out.amps = (up.amps + down.amps) / kSqrt2;
  return out;
}
}  // namespace detail

/// <q^power> for power in {1,2}, q = (a^dag + a)/sqrt(2). The imaginary
/// residue of the quadratic form is checked and then discarded.
inline double expect_q_moment(const StateVector& s, int power) {
  if (power != 1 && power != 2)
    throw std::invalid_argument("expect_q_moment: power must be 1 or 2");
  StateVector qs = detail::apply_q(s);
  if (power == 2) qs = detail::apply_q(qs);
  const Complex val = s.amps.dot(qs.amps);
  if (std::abs(val.imag()) > 1e-8)
    throw NumericsError("expect_q_moment: non-real expectation value, state corrupted");
  return val.real();
}

/// <p> = sqrt(2) Im<a>; companion of expect_q_moment for kick diagnostics.
inline double expect_p(const StateVector& s) {
  return kSqrt2 * expect_annihilation(s).imag();
}

/// Displacement D(beta) = exp(beta a^dag - beta^* a), realized as the unitary
/// exponential of the truncated tridiagonal generator.
inline StateVector apply_displacement(const StateVector& s, Complex beta) {
  const auto dim = s.amps.size();
  Eigen::MatrixXcd gen = Eigen::MatrixXcd::Zero(dim, dim);
  for (int n = 0; n + 1 < dim; ++n) {
    const double c = std::sqrt(n + 1.0);
    gen(n + 1, n) = beta * c;
    gen(n, n + 1) = -std::conj(beta) * c;
  }
  StateVector out;
  out.amps = gen.exp() * s.amps;
  const double drift = std::abs(out.norm() - s.norm());
  if (drift > 1e-6) {
    std::ostringstream msg;
    msg << "apply_displacement: norm loss " << drift << " signals inadequate n_max";
    throw NumericsError(msg.str());
  }
  return out;
}

}  // namespace kerrecho::fock
