#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kerrecho {

using Complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr Complex kImag{0.0, 1.0};

/// Raised when a state no longer fits its Fock-space truncation.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an integration or expectation-value sanity check fails
/// (norm/trace drift, Hermiticity loss, non-real expectation, ...).
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed or inconsistent scenario configurations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Detuning of the rotated-frame Hamiltonian, in units of the Kerr constant.
struct SystemParams {
  double delta = 0.0;
};

/// Gaussian drive pulse: amplitude e0 * exp(-((t - center)/sigma)^2).
struct PulseSpec {
  double e0 = 0.0;
  double sigma = 0.0;
  double center = 0.0;

  /// Impulsive strength lambda = -e0 * integral of the envelope.
  double impulse_strength() const { return -e0 * sigma * std::sqrt(kPi); }
  /// The drive is treated as exactly zero outside center +- 5 sigma.
  double window_begin() const { return center - 5.0 * sigma; }
  double window_end() const { return center + 5.0 * sigma; }
  double envelope(double t) const {
    const double u = (t - center) / sigma;
    return std::abs(u) <= 5.0 ? std::exp(-u * u) : 0.0;
  }
};

/// Idealized instantaneous kick, equivalent to the displacement D(i*lambda).
struct KickSpec {
  double lambda = 0.0;
  double center = 0.0;

  static KickSpec from_pulse(const PulseSpec& p) {
    return KickSpec{p.impulse_strength(), p.center};
  }
  Complex beta() const { return Complex{0.0, lambda}; }
};

using Excitation = std::variant<PulseSpec, KickSpec>;

inline double excitation_center(const Excitation& e) {
  return std::visit([](const auto& x) { return x.center; }, e);
}

inline double excitation_strength(const Excitation& e) {
  if (const auto* p = std::get_if<PulseSpec>(&e)) return p->impulse_strength();
  return std::get<KickSpec>(e).lambda;
}

/// Fock-space truncation: amplitudes kept for n = 0..n_max.
struct Truncation {
  int n_max = 1;
  double tail_tolerance = 1e-12;
};

/// n_max large enough that a coherent-like state of effective amplitude
/// alpha_eff keeps its Poisson tail below ~1e-12.
inline int recommended_n_max(double alpha_eff) {
  const double a = std::abs(alpha_eff);
  return static_cast<int>(std::ceil(a * a + 10.0 * a + 20.0));
}

/// Sampled observables over time. q1_se/q2_se are per-sample standard
/// errors of the mean and stay empty for deterministic (non-ensemble) runs.
struct TimeSeries {
  std::vector<double> times;
  std::vector<double> q1;
  std::vector<double> q2;
  std::vector<double> norm_or_trace;
  std::vector<double> q1_se;
  std::vector<double> q2_se;

  std::size_t size() const { return times.size(); }
};

}  // namespace kerrecho
