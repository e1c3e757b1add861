#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mzlock/errors.hpp"
#include "mzlock/plant.hpp"
#include "mzlock/rng.hpp"

using namespace mzlock;
using namespace mzlock::plant;
using Catch::Approx;

namespace {

NoiseParams quiet_noise() {
  NoiseParams n;
  n.diffusion = 0.0;
  n.components.clear();
  return n;
}

}  // namespace

TEST_CASE("noiseless environment is static", "[plant][environment]") {
  auto noise = quiet_noise();
  RandomStream rng(7, "environment");
  PlantState s;
  s.drift_rad = 0.3;
  s.phi_env = 0.3;
  for (double dt : {1e-6, 20e-6, 0.5}) {
    const auto next = step_environment(s, noise, dt, rng);
    CHECK(next.phi_env == s.phi_env);
    CHECK(next.time_s == Approx(s.time_s + dt));
  }
}

TEST_CASE("Wiener increments have variance diffusion*dt", "[plant][environment][statistics]") {
  NoiseParams noise;
  noise.diffusion = 1.0;
  noise.components.clear();
  const double dt = 20e-6;
  const int n = 1'000'000;
  RandomStream rng(2024, "environment");
  PlantState s;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto next = step_environment(s, noise, dt, rng);
    const double d = next.phi_env - s.phi_env;
    sum += d;
    sum2 += d * d;
    s = next;
  }
  const double mean = sum / n;
  const double var = (sum2 - n * mean * mean) / (n - 1);
  const double expected = noise.diffusion * dt;
  // Standard error of the sample variance of a normal sample.
  const double se = expected * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(var - expected) < 3.0 * se);
}

TEST_CASE("oscillatory component matches closed form", "[plant][environment]") {
  NoiseParams noise;
  noise.diffusion = 0.0;
  const double phase0 = 0.4;
  noise.components = {{100.0, 0.5, phase0}};
  CHECK(oscillation_at(noise, 2.5e-3) == Approx(0.5 * std::sin(kTwoPi * 0.25 + phase0)).margin(1e-15));

  RandomStream rng(1, "environment");
  PlantState s;
  for (int i = 0; i < 125; ++i) s = step_environment(s, noise, 20e-6, rng);
  CHECK(s.time_s == Approx(2.5e-3));
  CHECK(s.phi_env == Approx(0.5 * std::sin(kTwoPi * 0.25 + phase0)).margin(1e-12));
}

TEST_CASE("step_environment rejects bad input", "[plant][environment][errors]") {
  NoiseParams noise;
  RandomStream rng(1, "environment");
  PlantState s;
  CHECK_THROWS_AS(step_environment(s, noise, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(step_environment(s, noise, -1e-6, rng), std::invalid_argument);
  // 100 Hz component needs dt <= 1 ms.
  CHECK_THROWS_AS(step_environment(s, noise, 2e-3, rng), std::invalid_argument);
  CHECK_NOTHROW(step_environment(s, noise, 1e-3, rng));
  s.drift_rad = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step_environment(s, noise, 20e-6, rng), NumericError);
}

TEST_CASE("environment trajectories are reproducible", "[plant][environment][determinism]") {
  NoiseParams noise;
  RandomStream a(99, "environment");
  RandomStream b(99, "environment");
  RandomStream c(100, "environment");
  PlantState sa, sb, sc;
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    sa = step_environment(sa, noise, 20e-6, a);
    sb = step_environment(sb, noise, 20e-6, b);
    sc = step_environment(sc, noise, 20e-6, c);
    REQUIRE(sa == sb);
    differs = differs || sa.phi_env != sc.phi_env;
  }
  CHECK(differs);
}

TEST_CASE("unlocked drift over 100 s spans more than a fringe", "[plant][environment][property]") {
  NoiseParams noise;
  const double dt = 1e-3;
  int spanning = 0;
  const int seeds = 100;
  for (int seed = 1; seed <= seeds; ++seed) {
    RandomStream rng(static_cast<std::uint64_t>(seed), "environment");
    PlantState s;
    s.phi_env = oscillation_at(noise, 0.0);
    double lo = s.phi_env, hi = s.phi_env;
    for (int i = 0; i < 100'000; ++i) {
      s = step_environment(s, noise, dt, rng);
      lo = std::min(lo, s.phi_env);
      hi = std::max(hi, s.phi_env);
    }
    if (hi - lo > kTwoPi) ++spanning;
  }
  CHECK(spanning >= 99);
}

TEST_CASE("stretcher follows a first-order low-pass", "[plant][stretcher]") {
  StretcherParams p;
  const double v = 1.5;
  const double tau = 1.0 / (kTwoPi * p.corner_hz);

  SECTION("one step of length tau") {
    const auto r = stretcher_response(PlantState{}, v, tau, p);
    const double expected = (1.0 - std::exp(-1.0)) * p.gain_rad_per_v * v;
    CHECK(std::abs(r.state.phi_stretcher - expected) / expected < 1e-6);
    CHECK_FALSE(r.clamped);
    CHECK(r.state.stretcher_v == v);
  }
  SECTION("many short steps compose exactly") {
    PlantState s;
    for (int i = 0; i < 100; ++i) s = stretcher_response(s, v, tau / 100, p).state;
    const double expected = (1.0 - std::exp(-1.0)) * p.gain_rad_per_v * v;
    CHECK(std::abs(s.phi_stretcher - expected) / expected < 1e-6);
  }
  SECTION("DC gain") {
    PlantState s;
    for (int i = 0; i < 200; ++i) s = stretcher_response(s, v, 10 * tau, p).state;
    CHECK(s.phi_stretcher == Approx(p.gain_rad_per_v * v).epsilon(1e-12));
  }
  SECTION("fixed point") {
    PlantState s;
    s.phi_stretcher = p.gain_rad_per_v * v;
    for (double dt : {1e-12, 1e-9, 1e-3}) {
      CHECK(stretcher_response(s, v, dt, p).state.phi_stretcher == Approx(s.phi_stretcher));
    }
  }
  SECTION("drive outside the rails is clamped") {
    const auto hi = stretcher_response(PlantState{}, 25.0, 1.0, p);
    CHECK(hi.clamped);
    CHECK(hi.state.stretcher_v == p.v_hi);
    CHECK(hi.state.phi_stretcher == Approx(p.gain_rad_per_v * p.v_hi));
    const auto lo = stretcher_response(PlantState{}, -25.0, 1.0, p);
    CHECK(lo.clamped);
    CHECK(lo.state.stretcher_v == p.v_lo);
  }
  SECTION("rejects bad corner or dt") {
    StretcherParams bad = p;
    bad.corner_hz = 0.0;
    CHECK_THROWS_AS(stretcher_response(PlantState{}, 0.0, 1e-5, bad), std::invalid_argument);
    CHECK_THROWS_AS(stretcher_response(PlantState{}, 0.0, 0.0, p), std::invalid_argument);
  }
  SECTION("default throw is +-20 pi") {
    CHECK(p.gain_rad_per_v * p.v_hi == Approx(20 * kPi));
    CHECK(p.gain_rad_per_v * p.v_lo == Approx(-20 * kPi));
  }
}

TEST_CASE("phase modulator envelope and phase", "[plant][pm]") {
  PmParams pm;
  CHECK(pm_phase(pm, 0.0, 5.0) == 0.0);
  CHECK(pm_phase(pm, 0.0, 13.0) == 0.0);
  CHECK(pm_phase(pm, pm.v_pi, 5.0) == Approx(kPi));
  CHECK(pm.envelope(-0.1) == 0.0);
  CHECK(pm.envelope(0.0) == 1.0);
  CHECK(pm.envelope(10.0) == 1.0);
  // Quarter period of the 100 MHz ringing after the trailing edge.
  CHECK(pm.envelope(12.5) == Approx(0.2 * std::exp(-0.05 * 2.5)));
  CHECK(pm.envelope(17.5) == Approx(-0.2 * std::exp(-0.05 * 7.5)));
  CHECK_THROWS_AS(pm_phase(pm, -0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pm_phase(pm, 7.0, 0.0), std::invalid_argument);

  SECTION("linear in drive") {
    for (double t : {-3.0, 2.0, 11.3, 27.0}) {
      const double unit = pm_phase(pm, 1.0, t);
      for (double v : {0.5, 2.0, 6.8}) CHECK(pm_phase(pm, v, t) == Approx(v * unit).margin(1e-15));
    }
  }

  SECTION("6.8 V sweep: flat top for 10 ns then decaying oscillation") {
    std::vector<double> peaks;
    double prev = 0.0, prev2 = 0.0;
    double flat_start = -1.0, flat_end = -1.0;
    const double top = pm_phase(pm, 6.8, 5.0);
    for (int i = -100; i <= 800; ++i) {
      const double t = 0.1 * i;
      const double ph = pm_phase(pm, 6.8, t);
      if (std::abs(ph - top) < 1e-12) {
        if (flat_start < 0.0) flat_start = t;
        flat_end = t;
      }
      if (t > 10.0 && std::abs(prev) > std::abs(prev2) && std::abs(prev) >= std::abs(ph)) {
        peaks.push_back(std::abs(prev));
      }
      prev2 = prev;
      prev = ph;
    }
    CHECK(flat_end - flat_start == Approx(10.0).margin(1e-9));
    REQUIRE(peaks.size() >= 5);
    for (std::size_t i = 1; i < peaks.size(); ++i) CHECK(peaks[i] < peaks[i - 1]);
  }

  SECTION("closed-form integral matches quadrature") {
    for (auto [a, b] : {std::pair{-5.0, 2.5}, {3.0, 5.5}, {8.0, 10.5}, {11.0, 13.5}, {-2.0, 60.0}}) {
      // Midpoint rule on each smooth piece of the envelope.
      std::vector<double> cuts{a};
      for (double edge : {0.0, pm.pulse_width_ns}) {
        if (edge > a && edge < b) cuts.push_back(edge);
      }
      cuts.push_back(b);
      double sum = 0.0;
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const int n = 20000;
        const double h = (cuts[k + 1] - cuts[k]) / n;
        for (int i = 0; i < n; ++i) sum += h * pm.envelope(cuts[k] + (i + 0.5) * h);
      }
      CHECK(pm.envelope_integral(a, b) == Approx(sum).margin(1e-6));
      CHECK(pm.envelope_integral(b, a) == Approx(-sum).margin(1e-6));
    }
  }
}

TEST_CASE("quantum channel phase offset", "[plant][offset]") {
  OpticalParams opt;
  opt.delta_l_mm = 0.0;
  CHECK(quantum_phase_offset(opt) == 0.0);

  // Place the quantum channel exactly 200 GHz above the classical one.
  const double dnu = 200e9;
  OpticalParams o;
  o.lambda_q_nm = 1546.12;
  o.lambda_ph_nm = 1e9 * kSpeedOfLight / (kSpeedOfLight / (o.lambda_q_nm * 1e-9) - dnu);
  o.delta_l_mm = 1.0;
  const double oracle = kTwoPi * o.group_index * 1e-3 * dnu / kSpeedOfLight;
  CHECK(quantum_phase_offset(o) == Approx(oracle).epsilon(1e-9));
  CHECK(oracle == Approx(6.1535).margin(1e-4));
  // Quoted reference value 6.149 rad agrees to better than 0.1 %.
  CHECK(quantum_phase_offset(o) == Approx(6.149).epsilon(1e-3));

  o.delta_l_mm = 0.1;
  CHECK(quantum_phase_offset(o) == Approx(oracle / 10).epsilon(1e-9));

  SECTION("linear in delta L, zero for equal wavelengths") {
    OpticalParams x;
    const double unit = [&] {
      x.delta_l_mm = 1.0;
      return quantum_phase_offset(x);
    }();
    for (double dl : {0.05, 0.2, 0.7}) {
      x.delta_l_mm = dl;
      CHECK(quantum_phase_offset(x) == Approx(dl * unit));
    }
    x.lambda_ph_nm = x.lambda_q_nm;
    CHECK(quantum_phase_offset(x) == 0.0);
  }
}

TEST_CASE("output port fractions", "[plant][ports]") {
  OpticalParams ideal;
  ideal.t_arm1 = ideal.t_arm2 = 1.0;
  ideal.overlap = 1.0;
  auto f = port_fractions(ideal, 0.0);
  CHECK(f.a == Approx(1.0));
  CHECK(f.b == Approx(0.0).margin(1e-15));
  f = port_fractions(ideal, kPi / 2);
  CHECK(f.a == Approx(0.5));
  CHECK(f.b == Approx(0.5));

  OpticalParams partial = ideal;
  partial.overlap = 0.97;
  f = port_fractions(partial, kPi);
  CHECK(f.a == Approx(0.015));
  CHECK(f.b == Approx(0.985));

  OpticalParams imbalanced = ideal;
  imbalanced.t_arm2 = 0.5;
  CHECK(imbalanced.fringe_visibility() == Approx(2 * std::sqrt(0.5) / 1.5));
  CHECK(imbalanced.fringe_visibility() == Approx(0.9428).margin(1e-4));
  const auto hi = port_fractions(imbalanced, 0.0);
  const auto lo = port_fractions(imbalanced, kPi);
  CHECK((hi.a - lo.a) / (hi.a + lo.a) == Approx(imbalanced.fringe_visibility()));

  SECTION("energy bookkeeping and symmetry") {
    for (const auto& opt : {ideal, partial, imbalanced, OpticalParams{}}) {
      const double total = 0.5 * (opt.t_arm1 + opt.t_arm2);
      for (int i = 0; i <= 64; ++i) {
        const double phi = -7.0 + 0.23 * i;
        const auto p = port_fractions(opt, phi);
        CHECK(p.a + p.b == Approx(total).epsilon(1e-15));
        CHECK(p.a >= -1e-15);
        CHECK(p.a <= total + 1e-15);
        CHECK(port_fractions(opt, phi + kPi).b == Approx(p.a).margin(1e-14));
      }
    }
  }

  SECTION("monitor level spans the fringe visibility") {
    OpticalParams opt;
    CHECK(monitor_level(opt, 0.0) == Approx(0.5 + 0.5 * 0.97));
    CHECK(monitor_level(opt, kPi) == Approx(0.5 - 0.5 * 0.97));
    CHECK(monitor_level(opt, kPi / 2) == Approx(0.5));
  }
}
