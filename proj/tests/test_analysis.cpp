#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "mzlock/analysis.hpp"
#include "mzlock/errors.hpp"
#include "mzlock/plant.hpp"

using namespace mzlock;
using namespace mzlock::analysis;
using Catch::Approx;
using plant::kPi;

namespace {

std::vector<FringePoint> synthetic(double a, double vis, double v_pi, double phi0, int n,
                                   double v_end = 6.8) {
  std::vector<FringePoint> pts;
  for (int i = 0; i < n; ++i) {
    const double v = v_end * i / (n - 1);
    const double rate = a * (1 + vis * std::cos(kPi * v / v_pi + phi0));
    pts.push_back({v, rate, std::sqrt(std::max(rate, 1.0))});
  }
  return pts;
}

}  // namespace

TEST_CASE("raw visibility", "[analysis][visibility]") {
  CHECK(visibility(400, 400).value == 0.0);
  CHECK(visibility(0, 250).value == 1.0);
  CHECK(visibility(15, 1000).value == Approx(985.0 / 1015.0));
  CHECK(visibility(15, 1000).value == Approx(0.9704).margin(1e-4));
  const auto v = visibility(15, 1000);
  CHECK(v.uncertainty == Approx(2 * std::sqrt(15.0 * 15 * 1000 + 1000.0 * 1000 * 15) / (1015.0 * 1015)));
  CHECK_FALSE(v.net);
  CHECK_THROWS_AS(visibility(0, 0), UndefinedVisibility);
  CHECK_THROWS_AS(visibility(-1, 3), std::invalid_argument);

  SECTION("symmetric and scale invariant") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.1, 1e4);
    for (int i = 0; i < 200; ++i) {
      const double a = u(gen), b = u(gen), k = u(gen) / 100;
      CHECK(visibility(a, b).value == Approx(visibility(b, a).value));
      CHECK(visibility(k * a, k * b).value == Approx(visibility(a, b).value));
      CHECK(visibility(a, b).value >= 0.0);
      CHECK(visibility(a, b).value <= 1.0);
    }
  }
}

TEST_CASE("net visibility", "[analysis][visibility]") {
  CHECK(net_visibility(15, 1000, 0, 0).value == visibility(15, 1000).value);
  CHECK(net_visibility(15, 1000, 0, 0).net);
  CHECK(net_visibility(1.55, 500, 1.55, 6.87).value == 1.0);
  const auto v = net_visibility(16.5, 1000, 1.55, 6.87);
  CHECK(v.value == Approx((993.13 - 14.95) / (993.13 + 14.95)));
  CHECK(v.value == Approx(0.9703).margin(1e-4));
  CHECK_FALSE(v.clamped);

  const auto c = net_visibility(1.0, 500, 1.55, 6.87);
  CHECK(c.clamped);
  CHECK(c.value == 1.0);
  CHECK_THROWS_AS(net_visibility(1.0, 2.0, 1.55, 6.87), UndefinedVisibility);

  SECTION("dark subtraction never lowers the visibility when the dim channel is darker") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
      const double d2 = 10 * u(gen);
      const double d1 = d2 + 10 * u(gen);
      const double c1 = d1 + 100 * u(gen);
      const double c2 = c1 + d2 + 1000 * u(gen);
      CHECK(net_visibility(c1, c2, d1, d2).value >= visibility(c1, c2).value - 1e-15);
    }
  }
}

TEST_CASE("fringe fit round trip", "[analysis][fit]") {
  const auto pts = synthetic(500, 0.97, 5.0, 0.3, 15);
  const auto fit = fit_fringe(pts);
  CHECK(fit.amplitude == Approx(500).epsilon(1e-6));
  CHECK(fit.visibility == Approx(0.97).epsilon(1e-6));
  CHECK(fit.v_pi_fit == Approx(5.0).epsilon(1e-6));
  CHECK(fit.phi0 == Approx(0.3).epsilon(1e-6));
  CHECK(fit.r_squared == Approx(1.0).margin(1e-9));
  CHECK(fit.dof == 11);
  for (const auto& p : pts) CHECK(fit.model(p.voltage) == Approx(p.rate).epsilon(1e-6));

  SECTION("other phases and periods") {
    for (auto [v_pi, phi0] : {std::pair{4.0, -2.0}, {6.0, 3.0}, {3.1, 0.0}, {7.5, -0.9}}) {
      const auto f = fit_fringe(synthetic(80, 0.6, v_pi, phi0, 15));
      CHECK(f.v_pi_fit == Approx(v_pi).epsilon(1e-6));
      CHECK(f.visibility == Approx(0.6).epsilon(1e-6));
      CHECK(std::remainder(f.phi0 - phi0, 2 * kPi) == Approx(0.0).margin(1e-6));
    }
  }
  SECTION("uniform scaling of counts") {
    auto scaled = pts;
    for (auto& p : scaled) {
      p.rate *= 3.0;
      p.sigma *= 3.0;
    }
    const auto f = fit_fringe(scaled);
    CHECK(f.amplitude == Approx(3 * fit.amplitude).epsilon(1e-6));
    CHECK(f.visibility == Approx(fit.visibility).epsilon(1e-6));
    CHECK(f.v_pi_fit == Approx(fit.v_pi_fit).epsilon(1e-6));
  }
  SECTION("point order does not matter") {
    std::vector<FringePoint> rev(pts.rbegin(), pts.rend());
    const auto f = fit_fringe(rev);
    CHECK(f.v_pi_fit == Approx(fit.v_pi_fit).epsilon(1e-9));
    CHECK(f.visibility == Approx(fit.visibility).epsilon(1e-9));
  }
}

TEST_CASE("flat data has zero visibility and r2", "[analysis][fit]") {
  std::vector<FringePoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({0.5 * i, 200.0, 14.0});
  const auto fit = fit_fringe(pts);
  CHECK(fit.visibility == Approx(0.0).margin(1e-9));
  CHECK(fit.r_squared == 0.0);
  CHECK(fit.amplitude == Approx(200.0));
}

TEST_CASE("fit input validation", "[analysis][fit][errors]") {
  auto pts = synthetic(500, 0.97, 5.0, 0.3, 15);
  CHECK_THROWS_AS(fit_fringe(std::span(pts).first(5)), FitError);
  auto bad = pts;
  bad[3].sigma = 0.0;
  CHECK_THROWS_AS(fit_fringe(bad), FitError);
  std::vector<FringePoint> same(8, FringePoint{2.0, 100.0, 10.0});
  CHECK_THROWS_AS(fit_fringe(same), FitError);
  bad = pts;
  bad[0].rate = std::nan("");
  CHECK_THROWS_AS(fit_fringe(bad), FitError);
}

TEST_CASE("fit visibility error covers the truth", "[analysis][fit][statistics]") {
  // Realistic rates: D1-like port, 10 s dwell per point.
  const double a = 300.0, vis = 0.97, v_pi = 5.0, phi0 = 0.4, dwell = 10.0;
  std::mt19937_64 gen(12345);
  int covered = 0;
  int white = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<FringePoint> pts;
    for (int i = 0; i < 15; ++i) {
      const double v = 6.8 * i / 14;
      const double mean = a * (1 + vis * std::cos(kPi * v / v_pi + phi0)) * dwell;
      std::poisson_distribution<long> pois(mean);
      const double counts = static_cast<double>(pois(gen));
      pts.push_back({v, counts / dwell, std::sqrt(std::max(counts, 1.0)) / dwell});
    }
    const auto fit = fit_fringe(pts);
    if (std::abs(fit.visibility - vis) <= 2 * fit.visibility_sigma) ++covered;
    const auto runs = residual_runs(pts, fit);
    if (std::abs(runs.runs - runs.expected) <= 2 * runs.sd) ++white;
    CHECK(fit.v_pi_fit > 0.0);
    CHECK(fit.r_squared <= 1.0);
  }
  // Nominal 2 sigma coverage is 95 %; at most 10 % of the fits may show
  // non-random residual signs.
  CHECK(covered >= 90);
  CHECK(white >= 90);
}

TEST_CASE("residual runs statistic", "[analysis][runs]") {
  FringeFit flat;
  flat.amplitude = 10.0;
  flat.v_pi_fit = 1.0;
  std::vector<FringePoint> alternating;
  for (int i = 0; i < 10; ++i) alternating.push_back({double(i), i % 2 ? 11.0 : 9.0, 1.0});
  const auto r = residual_runs(alternating, flat);
  CHECK(r.runs == 10);
  CHECK(r.expected == Approx(6.0));
  std::vector<FringePoint> blocks;
  for (int i = 0; i < 10; ++i) blocks.push_back({double(i), i < 5 ? 11.0 : 9.0, 1.0});
  CHECK(residual_runs(blocks, flat).runs == 2);
}

TEST_CASE("time series summary", "[analysis][summary]") {
  detection::CountRecord rec{0.0, 1.0, 20, 1000, 0.5, true, 0.5};
  SECTION("single record") {
    const auto s = summarize_timeseries(std::span(&rec, 1), 0.0, 1.0, 1.55, 6.87);
    CHECK(s.bins == 1);
    CHECK(s.mean_d1 == 20.0);
    CHECK(s.sd_d1 == 0.0);
    CHECK(s.sd_net_visibility == 0.0);
    CHECK(s.mean_net_visibility == Approx(net_visibility(20, 1000, 1.55, 6.87).value));
  }
  SECTION("identical records") {
    std::vector<detection::CountRecord> recs;
    for (int i = 0; i < 5; ++i) {
      auto r = rec;
      r.t_start_s = i;
      recs.push_back(r);
    }
    const auto s = summarize_timeseries(recs, 0.0, 5.0, 0.0, 0.0);
    CHECK(s.bins == 5);
    CHECK(s.mean_d2 == 1000.0);
    CHECK(s.sd_d2 == 0.0);
    CHECK(s.mean_raw_visibility == Approx(980.0 / 1020.0));
    CHECK(s.sd_raw_visibility == Approx(0.0).margin(1e-15));
  }
  SECTION("window selects whole bins only") {
    std::vector<detection::CountRecord> recs;
    for (int i = 0; i < 4; ++i) {
      auto r = rec;
      r.t_start_s = i;
      r.counts_d1 = 10 * (i + 1);
      recs.push_back(r);
    }
    const auto s = summarize_timeseries(recs, 1.0, 3.5, 0.0, 0.0);
    CHECK(s.bins == 2);
    CHECK(s.mean_d1 == 25.0);
    CHECK(s.sd_d1 == Approx(std::sqrt(50.0)));
    CHECK_THROWS_AS(summarize_timeseries(recs, 10.0, 20.0, 0.0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("inset shape analysis", "[analysis][inset]") {
  plant::PmParams pm;
  std::vector<double> d, env, counts;
  for (int i = 0; i <= 130; ++i) {
    const double delay = -5.0 + 0.5 * i;
    d.push_back(delay);
    const double e = pm.envelope_integral(delay, delay + 2.5) / 2.5;
    env.push_back(e);
    // Overshooting response: phase 1.36 pi at full envelope.
    counts.push_back(30 + 600 * 0.5 * (1 - std::cos(1.36 * kPi * e)));
  }
  const auto pulse = analyze_inset(d, env, 2.5);
  CHECK(pulse.flat_top_ns == Approx(10.0));
  CHECK(pulse.plateau == Approx(1.0));
  CHECK(pulse.ringing_decays);
  CHECK(pulse.lobe_amplitudes.size() >= 5);

  const auto shaped = analyze_inset(d, counts, 2.5);
  CHECK(shaped.flat_top_ns == Approx(10.0));
  CHECK(shaped.plateau_start_ns == Approx(0.0));
  CHECK(shaped.plateau_end_ns == Approx(7.5));

  SECTION("growing oscillation is not decaying ringing") {
    std::vector<double> grow = env;
    for (std::size_t i = 0; i < grow.size(); ++i) {
      if (d[i] > 12.0) grow[i] = 0.01 * (d[i] - 12.0) * std::sin(0.2 * kPi * (d[i] - 12.0)) / 5.0;
    }
    CHECK_FALSE(analyze_inset(d, grow, 2.5).ringing_decays);
  }
  CHECK_THROWS_AS(analyze_inset(std::span(d).first(2), std::span(env).first(2), 2.5),
                  std::invalid_argument);
}
