#include "mzlock/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mzlock/errors.hpp"
#include "mzlock/plant.hpp"

namespace mzlock::analysis {

using plant::kPi;

VisibilityResult visibility(double c1, double c2) {
  if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("visibility: negative rate");
  const double sum = c1 + c2;
  if (!(sum > 0.0)) throw UndefinedVisibility("visibility undefined for zero total rate");
  VisibilityResult r;
  r.value = std::abs(c2 - c1) / sum;
  r.uncertainty = 2.0 * std::sqrt(c1 * c1 * c2 + c2 * c2 * c1) / (sum * sum);
  return r;
}

VisibilityResult net_visibility(double c1, double c2, double dark1, double dark2) {
  if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("net_visibility: negative rate");
  const double n1 = c1 - dark1;
  const double n2 = c2 - dark2;
  VisibilityResult r = visibility(std::max(n1, 0.0), std::max(n2, 0.0));
  r.net = true;
  r.clamped = n1 < 0.0 || n2 < 0.0;
  return r;
}

double FringeFit::model(double voltage) const {
  return amplitude * (1.0 + visibility * std::cos(kPi * voltage / v_pi_fit + phi0));
}

namespace {

struct LinearSolution {
  Eigen::Vector3d coef;  // offset, cosine, sine
  double chi2 = std::numeric_limits<double>::infinity();
  bool ok = false;
};

// Weighted linear least squares for fixed angular frequency k.
LinearSolution solve_linear(std::span<const FringePoint> pts, double k) {
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& p : pts) {
    const double w = 1.0 / (p.sigma * p.sigma);
    const Eigen::Vector3d basis(1.0, std::cos(k * p.voltage), std::sin(k * p.voltage));
    normal.noalias() += w * basis * basis.transpose();
    rhs.noalias() += w * p.rate * basis;
  }
  LinearSolution sol;
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return sol;
  // Guard against a rank-deficient basis (k near zero or at the Nyquist limit).
  const double pivot_ratio =
      ldlt.vectorD().minCoeff() / std::max(ldlt.vectorD().maxCoeff(), 1e-300);
  if (!(pivot_ratio > 1e-13)) return sol;
  sol.coef = ldlt.solve(rhs);
  double chi2 = 0.0;
  for (const auto& p : pts) {
    const double m = sol.coef[0] + sol.coef[1] * std::cos(k * p.voltage) +
                     sol.coef[2] * std::sin(k * p.voltage);
    const double r = (p.rate - m) / p.sigma;
    chi2 += r * r;
  }
  sol.chi2 = chi2;
  sol.ok = std::isfinite(chi2);
  return sol;
}

}  // namespace

FringeFit fit_fringe(std::span<const FringePoint> points) {
  const int n = static_cast<int>(points.size());
  if (n < 6) throw FitError("fringe fit needs at least 6 points, got " + std::to_string(n));
  for (const auto& p : points) {
    if (!std::isfinite(p.voltage) || !std::isfinite(p.rate) || !std::isfinite(p.sigma)) {
      throw FitError("fringe fit input contains non-finite values");
    }
    if (!(p.sigma > 0.0)) throw FitError("fringe fit needs positive sigmas");
  }

  std::vector<double> volts;
  volts.reserve(points.size());
  for (const auto& p : points) volts.push_back(p.voltage);
  std::sort(volts.begin(), volts.end());
  const double span = volts.back() - volts.front();
  if (!(span > 0.0)) throw FitError("fringe fit voltages do not span a range");
  double min_gap = span;
  for (std::size_t i = 1; i < volts.size(); ++i) {
    const double gap = volts[i] - volts[i - 1];
    if (gap > 0.0) min_gap = std::min(min_gap, gap);
  }

  // Angular frequency k = pi / v_pi, from a period of eight spans up to the
  // sampling limit of the densest spacing.
  const double k_lo = kPi / (4.0 * span);
  const double k_hi = kPi / min_gap;
  const int grid = std::max(2000, 100 * n);
  const double dk = (k_hi - k_lo) / grid;

  int best = -1;
  double best_chi2 = std::numeric_limits<double>::infinity();
  std::vector<double> profile(grid + 1, std::numeric_limits<double>::infinity());
  for (int i = 0; i < grid; ++i) {  // k_hi itself is aliased; skip it
    const double k = k_lo + dk * i;
    const auto sol = solve_linear(points, k);
    if (!sol.ok) continue;
    profile[i] = sol.chi2;
    if (sol.chi2 < best_chi2) {
      best_chi2 = sol.chi2;
      best = i;
    }
  }
  if (best < 0) throw FitError("fringe fit is singular at every trial period");

  const double a = k_lo + dk * std::max(best - 1, 0);
  const double b = k_lo + dk * std::min(best + 1, grid - 1);
  auto objective = [&](double k) {
    const auto sol = solve_linear(points, k);
    return sol.ok ? sol.chi2 : std::numeric_limits<double>::max();
  };
  double k_best = k_lo + dk * best;
  if (b > a) {
    const auto [k_ref, chi_ref] =
        boost::math::tools::brent_find_minima(objective, a, b, std::numeric_limits<double>::digits);
    if (chi_ref <= best_chi2) k_best = k_ref;
  }

  const auto sol = solve_linear(points, k_best);
  if (!sol.ok) throw FitError("fringe fit refinement became singular");
  const double offset = sol.coef[0];
  const double cc = sol.coef[1];
  const double ss = sol.coef[2];
  if (!(offset > 0.0)) {
    throw FitError("fringe fit produced a non-positive mean rate (" + std::to_string(offset) + ")");
  }
  const double swing = std::hypot(cc, ss);

  FringeFit fit;
  fit.amplitude = offset;
  fit.v_pi_fit = kPi / k_best;
  fit.phi0 = std::atan2(-ss, cc);
  fit.visibility = std::clamp(swing / offset, 0.0, 1.0);
  fit.chi2 = sol.chi2;
  fit.dof = n - 4;

  // Weighted coefficient of determination.
  double wsum = 0.0;
  double wy = 0.0;
  for (const auto& p : points) {
    const double w = 1.0 / (p.sigma * p.sigma);
    wsum += w;
    wy += w * p.rate;
  }
  const double mean = wy / wsum;
  double ss_tot = 0.0;
  for (const auto& p : points) ss_tot += (p.rate - mean) * (p.rate - mean) / (p.sigma * p.sigma);
  const double ss_tot_floor = 1e-24 * wsum * std::max(mean * mean, 1.0);
  fit.r_squared = ss_tot > ss_tot_floor ? 1.0 - sol.chi2 / ss_tot : 0.0;

  // Parameter covariance from the Fisher matrix of (offset, cos, sin, k).
  Eigen::Matrix4d fisher = Eigen::Matrix4d::Zero();
  for (const auto& p : points) {
    const double w = 1.0 / (p.sigma * p.sigma);
    const double c = std::cos(k_best * p.voltage);
    const double s = std::sin(k_best * p.voltage);
    const Eigen::Vector4d j(1.0, c, s, p.voltage * (-cc * s + ss * c));
    fisher.noalias() += w * j * j.transpose();
  }
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(fisher);
  if (lu.isInvertible()) {
    const Eigen::Matrix4d cov = lu.inverse();
    Eigen::Vector4d grad_vis;
    if (swing > 0.0) {
      grad_vis << -swing / (offset * offset), cc / (offset * swing), ss / (offset * swing), 0.0;
      fit.visibility_sigma = std::sqrt(std::max(grad_vis.dot(cov * grad_vis), 0.0));
    } else {
      fit.visibility_sigma = std::sqrt(std::max(cov(1, 1) + cov(2, 2), 0.0)) / offset;
    }
    fit.v_pi_sigma = kPi / (k_best * k_best) * std::sqrt(std::max(cov(3, 3), 0.0));
  } else {
    // Flat data leaves the period undetermined.
    const Eigen::Matrix3d sub = fisher.topLeftCorner<3, 3>();
    const Eigen::Matrix3d cov3 = sub.inverse();
    fit.visibility_sigma = std::sqrt(std::max(cov3(1, 1) + cov3(2, 2), 0.0)) / offset;
    fit.v_pi_sigma = std::numeric_limits<double>::infinity();
  }
  return fit;
}

double RunsStatistic::relative_deviation() const {
  return expected > 0.0 ? std::abs(runs - expected) / expected : 0.0;
}

RunsStatistic residual_runs(std::span<const FringePoint> points, const FringeFit& fit) {
  std::vector<std::pair<double, int>> signs;
  for (const auto& p : points) {
    const double r = p.rate - fit.model(p.voltage);
    if (r != 0.0) signs.emplace_back(p.voltage, r > 0.0 ? 1 : -1);
  }
  std::stable_sort(signs.begin(), signs.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  RunsStatistic st;
  if (signs.empty()) return st;
  int pos = 0;
  st.runs = 1;
  for (std::size_t i = 0; i < signs.size(); ++i) {
    if (signs[i].second > 0) ++pos;
    if (i > 0 && signs[i].second != signs[i - 1].second) ++st.runs;
  }
  const double n = static_cast<double>(signs.size());
  const double np = pos;
  const double nm = n - np;
  st.expected = 1.0 + 2.0 * np * nm / n;
  if (n > 1.0) {
    st.sd = std::sqrt(2.0 * np * nm * (2.0 * np * nm - n) / (n * n * (n - 1.0)));
  }
  return st;
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

TimeseriesSummary summarize_timeseries(std::span<const detection::CountRecord> records,
                                       double t0_s, double t1_s, double dark_rate1,
                                       double dark_rate2) {
  constexpr double eps = 1e-9;
  std::vector<double> r1, r2, raw, net, sig;
  for (const auto& rec : records) {
    if (rec.t_start_s < t0_s - eps || rec.t_start_s + rec.duration_s > t1_s + eps) continue;
    if (!(rec.duration_s > 0.0)) continue;
    const double c1 = static_cast<double>(rec.counts_d1) / rec.duration_s;
    const double c2 = static_cast<double>(rec.counts_d2) / rec.duration_s;
    r1.push_back(c1);
    r2.push_back(c2);
    if (c1 + c2 > 0.0) raw.push_back(visibility(c1, c2).value);
    try {
      const auto v = net_visibility(c1, c2, dark_rate1, dark_rate2);
      net.push_back(v.value);
      sig.push_back(v.uncertainty);
    } catch (const UndefinedVisibility&) {
      // A bin with no light above the dark floor carries no visibility.
    }
  }
  if (r1.empty()) {
    throw std::invalid_argument("summarize_timeseries: no records in [" + std::to_string(t0_s) +
                                ", " + std::to_string(t1_s) + "]");
  }
  TimeseriesSummary s;
  s.bins = static_cast<int>(r1.size());
  mean_sd(r1, s.mean_d1, s.sd_d1);
  mean_sd(r2, s.mean_d2, s.sd_d2);
  mean_sd(raw, s.mean_raw_visibility, s.sd_raw_visibility);
  mean_sd(net, s.mean_net_visibility, s.sd_net_visibility);
  double unused = 0.0;
  mean_sd(sig, s.mean_propagated_sigma, unused);
  return s;
}

InsetShape analyze_inset(std::span<const double> delays_ns, std::span<const double> values,
                         double gate_width_ns, double flat_tolerance, double floor_fraction) {
  if (delays_ns.size() != values.size() || values.size() < 3) {
    throw std::invalid_argument("analyze_inset: need at least three matching samples");
  }
  const std::size_t n = values.size();
  InsetShape shape;
  shape.baseline = values[0];

  double contrast = 0.0;
  for (double v : values) contrast = std::max(contrast, std::abs(v - shape.baseline));
  if (!(contrast > 0.0)) return shape;

  // Plateau: the longest run of samples spanning at most tol, well away from
  // the baseline. Edge overshoot can exceed the plateau, so the extreme
  // sample is not used directly.
  const double tol = flat_tolerance * contrast;
  std::size_t best_lo = 0, best_hi = 0;
  bool found = false;
  for (std::size_t lo = 0; lo < n; ++lo) {
    double vmin = values[lo], vmax = values[lo];
    std::size_t hi = lo;
    while (hi + 1 < n) {
      const double nmin = std::min(vmin, values[hi + 1]);
      const double nmax = std::max(vmax, values[hi + 1]);
      if (nmax - nmin > tol) break;
      vmin = nmin;
      vmax = nmax;
      ++hi;
    }
    const double mid = 0.5 * (vmin + vmax);
    if (std::abs(mid - shape.baseline) < 0.5 * contrast) continue;
    if (!found || hi - lo > best_hi - best_lo) {
      best_lo = lo;
      best_hi = hi;
      found = true;
    }
  }
  if (!found) return shape;
  const std::size_t lo = best_lo;
  const std::size_t hi = best_hi;
  double sum = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) sum += values[i];
  shape.plateau = sum / static_cast<double>(hi - lo + 1);
  shape.plateau_start_ns = delays_ns[lo];
  shape.plateau_end_ns = delays_ns[hi];
  shape.flat_top_ns = delays_ns[hi] - delays_ns[lo] + gate_width_ns;

  const double floor = floor_fraction * contrast;
  for (std::size_t i = hi + 2; i + 1 < n; ++i) {
    const double prev = std::abs(values[i - 1] - shape.baseline);
    const double cur = std::abs(values[i] - shape.baseline);
    const double next = std::abs(values[i + 1] - shape.baseline);
    if (cur > prev && cur >= next && cur > floor) {
      shape.lobe_delays_ns.push_back(delays_ns[i]);
      shape.lobe_amplitudes.push_back(cur);
    }
  }
  shape.ringing_decays = shape.lobe_amplitudes.size() >= 2;
  for (std::size_t i = 1; shape.ringing_decays && i < shape.lobe_amplitudes.size(); ++i) {
    if (!(shape.lobe_amplitudes[i] < shape.lobe_amplitudes[i - 1])) shape.ringing_decays = false;
  }
  return shape;
}

}  // namespace mzlock::analysis
