#pragma once

#include <cmath>

#include "kerrecho/types.hpp"

namespace kerrecho::analytic {

/// Closed-form free-evolution <q>(t) of a coherent state:
/// (e^{-|a|^2}/sqrt(2)) [a exp(|a|^2 e^{-2it} - i Delta t) + c.c.].
inline double q_free(double t, Complex alpha0, double delta) {
  const double a2 = std::norm(alpha0);
  const Complex z = a2 * std::exp(Complex{0.0, -2.0 * t});
  const Complex val = alpha0 * std::exp(z - a2 - Complex{0.0, delta * t});
  return kSqrt2 * val.real();
}

/// Second-order expansion of q_free around a revival: the Gaussian envelope
/// exp(-2|a|^2 t^2) times the fast carrier at frequency 2|a|^2 + Delta.
/// t_local counts from the revival center.
inline double q_near_revival(double t_local, Complex alpha0, double delta) {
  const double a2 = std::norm(alpha0);
  const double envelope = std::exp(-2.0 * a2 * t_local * t_local);
  const double phase = (2.0 * a2 + delta) * t_local - std::arg(alpha0);
  return kSqrt2 * std::abs(alpha0) * envelope * std::cos(phase);
}

/// Parameters of the weak-kick expansion. alpha0 must be real here (the
/// expansion is derived under that assumption); q_free has no such limit.
struct PerturbationContext {
  double alpha0 = 0.0;
  double delta = 0.0;
  double tau = 0.0;
  double lambda = 0.0;

  static PerturbationContext from_complex(Complex alpha0, double delta,
                                          double tau, double lambda) {
    if (alpha0.imag() != 0.0)
      throw std::invalid_argument(
          "PerturbationContext: complex alpha0 rejected, expansion assumes real alpha0");
    return PerturbationContext{alpha0.real(), delta, tau, lambda};
  }
};

/// z(t) = alpha0^2 exp(-2 i t); echo terms of order j carry e^{z(t + j tau)}.
inline Complex z_of(double t, double alpha0) {
  return alpha0 * alpha0 * std::exp(Complex{0.0, -2.0 * t});
}

/// Prefactors A_j, B_j, C_{j1,j2} evaluated at time t, plus the g/h/w
/// polynomial evaluators of the kick expansion.
struct CoefficientSet {
  double t = 0.0;
  PerturbationContext ctx;

  Complex A(int j) const {
    const double th = (j * (1.0 + ctx.delta) + j * j) * ctx.tau + ctx.delta * t;
    return amp(j + 1) * std::exp(Complex{0.0, -th});
  }
  Complex B(int j) const {
    const double th = (j * (1.0 - ctx.delta) - j * j) * ctx.tau + ctx.delta * t;
    return amp(j + 1) * std::exp(Complex{0.0, -th});
  }
  Complex C(int j1, int j2) const {
    const double th =
        (j1 + j2 + j2 * j2 - j1 * j1 + ctx.delta * (j2 - j1)) * ctx.tau +
        ctx.delta * t;
    return amp(j1 + j2 + 1) * std::exp(Complex{0.0, -th});
  }

  Complex g(int j, Complex z) const {
    const double l = ctx.lambda;
    const Complex il{0.0, l};
    switch (j) {
      case -2: return -0.5 * l * l * (2.0 * z + z * z);
      case -1: return il * (z + 1.0);
      case 0: return -l * l * (z + 2.0);
      case 1: return il;
      case 2: return Complex{-0.5 * l * l, 0.0};
      default: throw std::invalid_argument("CoefficientSet::g: j out of range");
    }
  }
  Complex h(int j, Complex z) const {
    const double l = ctx.lambda;
    const Complex il{0.0, l};
    switch (j) {
      case -2: return -0.5 * l * l * z * z;
      case -1: return -il * z;
      case 0: return -l * l * (z + 1.0);
      case 1: return -il;
      case 2: return Complex{-0.5 * l * l, 0.0};
      default: throw std::invalid_argument("CoefficientSet::h: j out of range");
    }
  }
  Complex w(int j1, int j2, Complex z) const {
    const double l2 = ctx.lambda * ctx.lambda;
    if (j1 == -1 && j2 == -1) return l2 * (z * z + 2.0 * z);
    if (j1 == -1 && j2 == 1) return l2 * z;
    if (j1 == 1 && j2 == -1) return l2 * (z + 1.0);
    if (j1 == 1 && j2 == 1) return Complex{l2, 0.0};
    throw std::invalid_argument("CoefficientSet::w: indices must be +-1");
  }

 private:
  double amp(int power) const {
    return std::pow(ctx.alpha0, power) * std::exp(-ctx.alpha0 * ctx.alpha0);
  }
};

inline CoefficientSet coefficient_set(double t, const PerturbationContext& ctx) {
  return CoefficientSet{t, ctx};
}

namespace detail {

// One order-j contribution: poly_sum(z_j) * exp(z_j - a^2 - i theta) * a^pow,
// assembled with a combined exponent so e^{-a^2} never underflows against
// the e^{z} peak value e^{+a^2}.
struct TermBuilder {
  double t;
  const PerturbationContext& ctx;

  Complex z_at(int j) const { return z_of(t + j * ctx.tau, ctx.alpha0); }

  Complex scaled(int pow, double theta_tau, Complex z, Complex poly) const {
    const double a = ctx.alpha0;
    const Complex expo =
        z - a * a - Complex{0.0, theta_tau * ctx.tau + ctx.delta * t};
    return poly * std::pow(a, pow) * std::exp(expo);
  }

  Complex a_piece(int j, Complex z, Complex poly) const {
    return scaled(j + 1, j * (1.0 + ctx.delta) + j * j, z, poly);
  }
  Complex b_piece(int j, Complex z, Complex poly) const {
    return scaled(j + 1, j * (1.0 - ctx.delta) - j * j, z, poly);
  }
  Complex c_piece(int j1, int j2, Complex z, Complex poly) const {
    return scaled(j1 + j2 + 1,
                  j1 + j2 + j2 * j2 - j1 * j1 + ctx.delta * (j2 - j1), z, poly);
  }
};

}  // namespace detail

/// Real contributions of the individual expansion terms to <q>(t); each entry
/// already includes the complex conjugate. Summing all six gives the full
/// second-order signal; dropping the lambda^2 entries gives the first-order one.
struct EchoTerms {
  double free_term = 0.0;       // e^{z(t)}
  double kick_response = 0.0;   // j = -1, e^{z(t - tau)}
  double quantum_first = 0.0;   // j = +1, e^{z(t + tau)}
  double central_second = 0.0;  // j = 0 lambda^2 correction, e^{z(t)}
  double classical_first = 0.0; // j = -2, e^{z(t - 2 tau)}
  double quantum_second = 0.0;  // j = +2, e^{z(t + 2 tau)}

  double first_order_total() const {
    return free_term + kick_response + quantum_first;
  }
  double second_order_total() const {
    return first_order_total() + central_second + classical_first + quantum_second;
  }
};

inline EchoTerms q_second_order_terms(double t, const PerturbationContext& ctx) {
  if (ctx.alpha0 == 0.0) return {};
  const detail::TermBuilder tb{t, ctx};
  const CoefficientSet cs{t, ctx};
  auto re2 = [](Complex v) { return 2.0 * v.real() / kSqrt2; };

  EchoTerms out;
  {
    const Complex z = tb.z_at(0);
    out.free_term = re2(tb.a_piece(0, z, 1.0));
    out.central_second = re2(tb.a_piece(0, z, cs.g(0, z)) +
                             tb.b_piece(0, z, cs.h(0, z)) +
                             tb.c_piece(1, 1, z, cs.w(1, 1, z)) +
                             tb.c_piece(-1, -1, z, cs.w(-1, -1, z)));
  }
  {
    const Complex z = tb.z_at(-1);
    out.kick_response =
        re2(tb.a_piece(-1, z, cs.g(-1, z)) + tb.b_piece(1, z, cs.h(1, z)));
  }
  {
    const Complex z = tb.z_at(1);
    out.quantum_first =
        re2(tb.a_piece(1, z, cs.g(1, z)) + tb.b_piece(-1, z, cs.h(-1, z)));
  }
  {
    const Complex z = tb.z_at(-2);
    out.classical_first = re2(tb.a_piece(-2, z, cs.g(-2, z)) +
                              tb.b_piece(2, z, cs.h(2, z)) +
                              tb.c_piece(1, -1, z, cs.w(1, -1, z)));
  }
  {
    const Complex z = tb.z_at(2);
    out.quantum_second = re2(tb.a_piece(2, z, cs.g(2, z)) +
                             tb.b_piece(-2, z, cs.h(-2, z)) +
                             tb.c_piece(-1, 1, z, cs.w(-1, 1, z)));
  }
  return out;
}

/// <q>(t) to first order in the kick strength: free term plus the j = +-1
/// interference terms. Kept as an independent evaluation path so the series
/// consistency with q_second_order is a real check.
inline double q_first_order(double t, const PerturbationContext& ctx) {
  if (ctx.alpha0 == 0.0) return 0.0;
  const double a = ctx.alpha0;
  const double a2 = a * a;
  const double l = ctx.lambda;
  const Complex il{0.0, l};
  const Complex z0 = z_of(t, a);
  const Complex zm = z_of(t - ctx.tau, a);
  const Complex zp = z_of(t + ctx.tau, a);

  auto phase = [&](double theta_tau) {
    return Complex{0.0, -(theta_tau * ctx.tau + ctx.delta * t)};
  };
  // c_f e^{z(t)}
  Complex expr = a * std::exp(z0 - a2 + phase(0.0));
  // lambda c_{-1} e^{z(t-tau)} = (A_{-1} g_{-1} + B_{+1} h_{+1}) / sqrt(2)
  expr += (il * (zm + 1.0)) * std::exp(zm - a2 + phase(-(1.0 + ctx.delta) + 1.0));
  expr += (-il) * a2 * std::exp(zm - a2 + phase((1.0 - ctx.delta) - 1.0));
  // lambda c_{+1} e^{z(t+tau)} = (A_{+1} g_{+1} + B_{-1} h_{-1}) / sqrt(2)
  expr += il * a2 * std::exp(zp - a2 + phase((1.0 + ctx.delta) + 1.0));
  expr += (-il * zp) * std::exp(zp - a2 + phase(-(1.0 - ctx.delta) - 1.0));

  return 2.0 * expr.real() / kSqrt2;
}

/// <q>(t) to second order in the kick strength (all Appendix-style terms).
inline double q_second_order(double t, const PerturbationContext& ctx) {
  return q_second_order_terms(t, ctx).second_order_total();
}

}  // namespace kerrecho::analytic
