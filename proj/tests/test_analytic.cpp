#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "kerrecho/analytic.hpp"
#include "kerrecho/dynamics.hpp"
#include "kerrecho/fock.hpp"

using namespace kerrecho;
using namespace kerrecho::analytic;

TEST_CASE("free-evolution closed form at reference points") {
  REQUIRE_THAT(q_free(0.0, 4.0, 0.0), Catch::Matchers::WithinAbs(4.0 * kSqrt2, 1e-12));
  // At t = pi/2 the inner exponent flips sign and the signal is e^{-2|a|^2} down.
  REQUIRE_THAT(q_free(kPi / 2.0, 4.0, 0.0),
               Catch::Matchers::WithinRel(4.0 * kSqrt2 * std::exp(-32.0), 1e-10));
  for (double t : {0.1, 0.77, 2.9})
    REQUIRE_THAT(q_free(t + kPi, 4.0, 0.0),
                 Catch::Matchers::WithinAbs(q_free(t, 4.0, 0.0), 1e-12));
}

TEST_CASE("free-evolution formula matches the truncated Fock sum") {
  for (double alpha : {1.0, 2.0, 4.0, 6.0}) {
    const Truncation trunc{
        std::max(static_cast<int>(4 * alpha * alpha), recommended_n_max(alpha))};
    const auto s0 = fock::coherent_state(alpha, trunc);
    const SystemParams params{0.0};
    for (int i = 0; i <= 1000; ++i) {
      const double t = kPi * i / 1000.0;
      const auto st = dynamics::free_propagate(s0, t, params);
      REQUIRE_THAT(fock::expect_q_moment(st, 1),
                   Catch::Matchers::WithinAbs(q_free(t, alpha, 0.0), 1e-10));
    }
  }
}

TEST_CASE("near-revival expansion") {
  REQUIRE_THAT(q_near_revival(0.0, 4.0, 0.0),
               Catch::Matchers::WithinAbs(4.0 * kSqrt2, 1e-12));

  // Envelope reaches 1/e at t = 1/(sqrt(2) alpha0).
  const double t_e = 1.0 / (kSqrt2 * 4.0);
  const double envelope =
      q_near_revival(t_e, 4.0, 0.0) / (kSqrt2 * 4.0 * std::cos(32.0 * t_e));
  REQUIRE_THAT(envelope, Catch::Matchers::WithinAbs(std::exp(-1.0), 1e-12));

  double max_gap = 0.0, max_signal = 0.0;
  for (int i = -200; i <= 200; ++i) {
    const double t = 0.05 * i / 200.0;
    max_gap = std::max(max_gap, std::abs(q_near_revival(t, 4.0, 0.0) - q_free(t, 4.0, 0.0)));
    max_signal = std::max(max_signal, std::abs(q_free(t, 4.0, 0.0)));
  }
  REQUIRE(max_gap < 0.05 * max_signal);
}

TEST_CASE("coefficient set basics") {
  const PerturbationContext ctx{3.0, 0.02, 0.4, 0.1};
  const auto cs = coefficient_set(1.3, ctx);

  SECTION("g, h, w vanish identically at lambda = 0") {
    PerturbationContext free_ctx = ctx;
    free_ctx.lambda = 0.0;
    const auto cs0 = coefficient_set(1.3, free_ctx);
    for (int j = -2; j <= 2; ++j) {
      REQUIRE(std::abs(cs0.g(j, Complex{0.7, -0.2})) == 0.0);
      REQUIRE(std::abs(cs0.h(j, Complex{0.7, -0.2})) == 0.0);
    }
    for (int j1 : {-1, 1})
      for (int j2 : {-1, 1})
        REQUIRE(std::abs(cs0.w(j1, j2, Complex{0.7, -0.2})) == 0.0);
  }

  SECTION("A_0 does not depend on the kick time") {
    PerturbationContext other = ctx;
    other.tau = 2.1;
    const auto cs2 = coefficient_set(1.3, other);
    REQUIRE(std::abs(cs.A(0) - cs2.A(0)) < 1e-15);
    const Complex expected =
        ctx.alpha0 * std::exp(-ctx.alpha0 * ctx.alpha0) *
        std::exp(Complex{0.0, -ctx.delta * 1.3});
    REQUIRE(std::abs(cs.A(0) - expected) < 1e-15);
  }

  SECTION("printed low-order polynomials") {
    REQUIRE(std::abs(cs.g(-1, Complex{1.0, 0.0}) - Complex{0.0, 0.2}) < 1e-15);
    REQUIRE(std::abs(cs.h(-1, Complex{1.0, 0.0}) - Complex{0.0, -0.1}) < 1e-15);
    REQUIRE(std::abs(cs.g(1, Complex{5.0, 1.0}) - Complex{0.0, 0.1}) < 1e-15);
    REQUIRE(std::abs(cs.h(1, Complex{5.0, 1.0}) - Complex{0.0, -0.1}) < 1e-15);
    REQUIRE(std::abs(cs.w(1, 1, Complex{5.0, 1.0}) - Complex{0.01, 0.0}) < 1e-15);
  }
}

TEST_CASE("first-order formula reduces to the free signal at lambda = 0") {
  const PerturbationContext ctx{4.0, 0.01, 0.8, 0.0};
  for (double t : {0.0, 0.5, 1.7, 2.9})
    REQUIRE_THAT(q_first_order(t, ctx),
                 Catch::Matchers::WithinAbs(q_free(t, 4.0, 0.01), 1e-12));
}

TEST_CASE("first-order echo term is a localized packet before the revival") {
  // Kick at tau = 0.8: the interference term peaks at t = pi - tau = 2.34.
  const PerturbationContext ctx{4.0, 0.01, 0.8, -0.5 * 0.02 * std::sqrt(kPi)};
  double best_t = 0.0, best = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double t = 1.2 + (3.0 - 1.2) * i / 3000.0;
    const double packet = std::abs(q_first_order(t, ctx) - q_free(t, 4.0, 0.01));
    if (packet > best) {
      best = packet;
      best_t = t;
    }
  }
  REQUIRE_THAT(best_t, Catch::Matchers::WithinAbs(kPi - 0.8, 0.02));
  REQUIRE(best > 0.1);
}

TEST_CASE("second-order terms restricted to first order reproduce q_first_order") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const PerturbationContext ctx{1.0 + 5.0 * u(rng), 0.02 * u(rng), 0.2 + u(rng),
                                  0.2 * u(rng) - 0.1};
    const double t = ctx.tau + 3.0 * u(rng);
    const auto terms = q_second_order_terms(t, ctx);
    REQUIRE_THAT(terms.first_order_total(),
                 Catch::Matchers::WithinAbs(q_first_order(t, ctx),
                                            1e-12 * (1.0 + std::abs(q_first_order(t, ctx)))));
  }
}

TEST_CASE("second-order packets sit at 2 tau and T_rev - 2 tau") {
  const PerturbationContext ctx{6.0, 0.01, 0.5, -3.0 * 0.01 * std::sqrt(kPi)};
  // The packet center is the |term|^2-weighted centroid; the carrier phase
  // makes the raw argmax jitter by a fraction of the oscillation period.
  auto packet_center = [&](double lo, double hi, auto term_of) {
    double num = 0.0, den = 0.0, amp = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double t = lo + (hi - lo) * i / 4000.0;
      const double v = term_of(q_second_order_terms(t, ctx));
      num += t * v * v;
      den += v * v;
      amp = std::max(amp, std::abs(v));
    }
    return std::pair{num / den, amp};
  };
  const auto classical =
      packet_center(0.7, 1.3, [](const EchoTerms& t) { return t.classical_first; });
  REQUIRE_THAT(classical.first, Catch::Matchers::WithinAbs(1.0, 0.03));
  REQUIRE(classical.second > 0.1);
  const auto quantum2 =
      packet_center(1.84, 2.44, [](const EchoTerms& t) { return t.quantum_second; });
  REQUIRE_THAT(quantum2.first, Catch::Matchers::WithinAbs(kPi - 1.0, 0.03));
  REQUIRE(quantum2.second > 0.1);
}

TEST_CASE("echo-term envelopes are pi periodic and peak on the predicted grid") {
  const double alpha0 = 4.0;
  const double tau = 0.8;
  for (int j : {-2, -1, 1, 2}) {
    // |e^{z(t + j tau)}| peaks where t + j tau = 0 mod pi.
    double best_t = 0.0, best = 0.0;
    const double lo = std::abs(j) * tau + 0.1;
    for (int i = 0; i <= 20000; ++i) {
      const double t = lo + kPi * i / 20000.0;
      const double v = std::exp(z_of(t + j * tau, alpha0).real());
      if (v > best) {
        best = v;
        best_t = t;
      }
      REQUIRE_THAT(std::exp(z_of(t + j * tau + kPi, alpha0).real()),
                   Catch::Matchers::WithinRel(v, 1e-9));
    }
    const double phase = std::fmod(best_t + j * tau + 2.0 * kPi, kPi);
    REQUIRE((phase < 0.01 || kPi - phase < 0.01));
  }
}

TEST_CASE("second-minus-first difference scales as lambda squared") {
  auto max_diff = [](double lambda) {
    const PerturbationContext ctx{4.0, 0.01, 0.8, lambda};
    double best = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double t = 0.8 + (kPi - 0.8) * i / 4000.0;
      best = std::max(best, std::abs(q_second_order(t, ctx) - q_first_order(t, ctx)));
    }
    return best;
  };
  const double ratio = max_diff(0.08) / max_diff(0.04);
  REQUIRE_THAT(ratio, Catch::Matchers::WithinAbs(4.0, 0.4));
}

TEST_CASE("perturbation context rejects complex alpha0") {
  REQUIRE_THROWS_AS(
      PerturbationContext::from_complex(Complex{1.0, 0.5}, 0.0, 0.5, 0.1),
      std::invalid_argument);
  REQUIRE_NOTHROW(PerturbationContext::from_complex(Complex{1.0, 0.0}, 0.0, 0.5, 0.1));
}
