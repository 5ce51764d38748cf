#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "kerrecho/analytic.hpp"
#include "kerrecho/dynamics.hpp"
#include "kerrecho/fock.hpp"

using namespace kerrecho;
using namespace kerrecho::dynamics;
using fock::StateVector;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

double l2_distance(const StateVector& a, const StateVector& b) {
  return (a.amps - b.amps).norm();
}

}  // namespace

TEST_CASE("energy levels of the rotated frame") {
  REQUIRE(energy_level(0, {0.37}) == 0.0);
  REQUIRE(energy_level(0, {-2.0}) == 0.0);
  REQUIRE(energy_level(1, {0.0}) == 0.0);
  for (double delta : {0.0, 0.01, 0.3})
    for (int n = 0; n < 40; ++n)
      REQUIRE_THAT(energy_level(n + 1, {delta}) - energy_level(n, {delta}),
                   Catch::Matchers::WithinAbs(delta + 2.0 * n, 1e-12));
}

TEST_CASE("free propagation for zero duration is the identity") {
  const auto s = fock::coherent_state(3.0, {60});
  const auto out = free_propagate(s, 0.0, {0.4});
  REQUIRE(out.amps == s.amps);
}

TEST_CASE("resonant evolution revives exactly after pi") {
  const auto s = fock::coherent_state(4.0, {80});
  const auto revived = free_propagate(s, kPi, {0.0});
  REQUIRE(std::abs(fock::overlap(s, revived)) > 1.0 - 1e-10);

  // Full-state periodicity at intermediate times as well.
  for (double t : {0.3, 1.1}) {
    const auto a = free_propagate(s, t, {0.0});
    const auto b = free_propagate(s, t + kPi, {0.0});
    REQUIRE(std::abs(fock::overlap(a, b)) > 1.0 - 1e-10);
  }
}

TEST_CASE("free propagation reproduces the closed-form signal") {
  const auto s = fock::coherent_state(4.0, {80});
  const auto st = free_propagate(s, 0.3, {0.0});
  REQUIRE_THAT(fock::expect_q_moment(st, 1),
               Catch::Matchers::WithinAbs(analytic::q_free(0.3, 4.0, 0.0), 1e-10));
}

TEST_CASE("driven propagation with zero amplitude is free propagation") {
  const auto s = fock::coherent_state(2.0, {44});
  const PulseSpec silent{0.0, 0.02, 0.5};
  const auto driven = propagate_driven(s, silent, 0.4, 0.6, {0.01});
  const auto free = free_propagate(s, 0.2, {0.01});
  REQUIRE(l2_distance(driven, free) < 1e-13);
}

TEST_CASE("strong short pulse approaches the impulsive displacement") {
  // Oracle: displacement kick D(i lambda) sandwiched between free segments.
  const PulseSpec pulse{3.0, 0.01, 0.5};
  const SystemParams params{0.01};
  const Truncation trunc{120};
  const auto s0 = fock::coherent_state(6.0, trunc);

  const auto driven = propagate_driven(free_propagate(s0, 0.45, params), pulse,
                                       0.45, 0.55, params);

  auto kicked = free_propagate(s0, 0.5, params);
  kicked = fock::apply_displacement(kicked, Complex{0.0, pulse.impulse_strength()});
  kicked = free_propagate(kicked, 0.05, params);

  // The residual is the physical impulsive-approximation error at these
  // parameters (transition amplitudes pick up exp(-omega^2 sigma^2 / 4)
  // relative to the ideal kick); it is dt-independent and equals 0.0603.
  REQUIRE(l2_distance(driven, kicked) < 0.07);
}

TEST_CASE("impulsive approximation error vanishes quadratically in sigma") {
  const SystemParams params{0.0};
  const double lambda = -0.1;
  const Truncation trunc{recommended_n_max(4.2)};
  const auto s0 = fock::coherent_state(4.0, trunc);

  auto kicked = free_propagate(s0, 0.5, params);
  kicked = fock::apply_displacement(kicked, Complex{0.0, lambda});

  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {0.04, 0.02, 0.01, 0.005}) {
    const double e0 = -lambda / (sigma * std::sqrt(kPi));
    auto driven = free_propagate(s0, 0.5 - 5.0 * sigma, params);
    driven = propagate_driven(driven, PulseSpec{e0, sigma, 0.5}, 0.5 - 5.0 * sigma,
                              0.5 + 5.0 * sigma, params);
    const auto reference = free_propagate(kicked, 5.0 * sigma, params);
    const double dist = l2_distance(driven, reference);
    REQUIRE(dist < 0.35 * prev);  // approaching sigma^2 convergence
    prev = dist;
  }
}

TEST_CASE("window splitting leaves the propagated state unchanged") {
  const PulseSpec pulse{1.0, 0.02, 0.5};
  const SystemParams params{0.01};
  const auto s0 = fock::coherent_state(3.0, {recommended_n_max(3.2)});
  const double dt = 2e-4;

  const auto whole = propagate_driven(s0, pulse, 0.45, 0.55, params, dt);
  const auto first = propagate_driven(s0, pulse, 0.45, 0.50, params, dt);
  const auto both = propagate_driven(first, pulse, 0.50, 0.55, params, dt);
  REQUIRE(l2_distance(whole, both) < 1e-10);
}

TEST_CASE("norm drift of the driven integrator stays within contract") {
  const PulseSpec pulse{3.0, 0.01, 0.5};
  const SystemParams params{0.01};
  const auto s0 = fock::coherent_state(6.0, {120});
  const auto out = propagate_driven(free_propagate(s0, 0.45, params), pulse, 0.45,
                                    0.55, params);
  const double drift_per_unit_time = std::abs(out.norm() - 1.0) / 0.1;
  REQUIRE(drift_per_unit_time < 1e-9);
}

TEST_CASE("unkicked scenario matches the closed form across a revival") {
  const auto s0 = fock::coherent_state(4.0, {80});
  const auto ts = run_kicked_scenario(s0, {}, {0.0}, linspace(0.0, kPi, 1000));
  double linf = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i)
    linf = std::max(linf,
                    std::abs(ts.q1[i] - analytic::q_free(ts.times[i], 4.0, 0.0)));
  REQUIRE(linf < 1e-8);
}

TEST_CASE("collapse envelope decays on t_c = 1/(2 alpha0)") {
  const auto s0 = fock::coherent_state(4.0, {80});
  const auto ts = run_kicked_scenario(s0, {}, {0.0}, linspace(0.0, 0.35, 1751));
  std::vector<double> peak_t, peak_ln;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.times[i] > 0.3) break;
    const double v = std::abs(ts.q1[i]);
    const bool left = i == 0 || v >= std::abs(ts.q1[i - 1]);
    const bool right = i + 1 >= ts.size() || v >= std::abs(ts.q1[i + 1]);
    if (left && right) {
      peak_t.push_back(ts.times[i]);
      peak_ln.push_back(std::log(v));
    }
  }
  REQUIRE(peak_t.size() >= 3);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < peak_t.size(); ++i) {
    const double x = peak_t[i] * peak_t[i];
    sx += x;
    sy += peak_ln[i];
    sxx += x * x;
    sxy += x * peak_ln[i];
  }
  const double n = static_cast<double>(peak_t.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double t_c_fit = std::sqrt(-0.5 / slope);
  REQUIRE_THAT(t_c_fit, Catch::Matchers::WithinRel(0.125, 0.05));
}

TEST_CASE("pulse and displacement kick converge as the pulse narrows") {
  const SystemParams params{0.0};
  const double lambda = -0.1;
  const Truncation trunc{recommended_n_max(4.2)};
  const auto s0 = fock::coherent_state(4.0, trunc);
  const auto samples = linspace(0.0, 1.2, 601);

  const auto kicked =
      run_kicked_scenario(s0, {KickSpec{lambda, 0.5}}, params, samples);

  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {0.04, 0.02, 0.01}) {
    const double e0 = -lambda / (sigma * std::sqrt(kPi));
    const auto driven =
        run_kicked_scenario(s0, {PulseSpec{e0, sigma, 0.5}}, params, samples);
    double linf = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      linf = std::max(linf, std::abs(driven.q1[i] - kicked.q1[i]));
    REQUIRE(linf < prev);
    prev = linf;
  }
}

TEST_CASE("overlapping pulse windows are rejected") {
  const auto s0 = fock::coherent_state(2.0, {44});
  const std::vector<Excitation> bad{PulseSpec{1.0, 0.05, 0.5},
                                    PulseSpec{1.0, 0.05, 0.6}};
  REQUIRE_THROWS_AS(
      run_kicked_scenario(s0, bad, {0.0}, linspace(0.0, 1.0, 200)),
      std::invalid_argument);
}
