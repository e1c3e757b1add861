#pragma once

#include <span>
#include <vector>

#include "mzlock/detection.hpp"

namespace mzlock::analysis {

struct VisibilityResult {
  double value = 0.0;
  double uncertainty = 0.0;  // 1 sigma, first-order Poisson propagation
  bool net = false;          // dark counts subtracted
  bool clamped = false;      // a dark-subtracted rate went negative and was set to zero
};

/// |c2 - c1| / (c2 + c1). Throws UndefinedVisibility when c1 + c2 == 0.
VisibilityResult visibility(double c1, double c2);

/// Visibility after subtracting dark rates; negative rates are clamped to 0.
VisibilityResult net_visibility(double c1, double c2, double dark1, double dark2);

struct FringePoint {
  double voltage = 0.0;
  double rate = 0.0;   // counts/s
  double sigma = 0.0;  // 1 sigma of rate
};

/// Weighted least-squares fit of rate(V) = A (1 + vis cos(pi V / v_pi + phi0)).
struct FringeFit {
  double amplitude = 0.0;
  double v_pi_fit = 0.0;
  double phi0 = 0.0;  // wrapped to (-pi, pi]
  double visibility = 0.0;
  double r_squared = 0.0;
  double visibility_sigma = 0.0;
  double v_pi_sigma = 0.0;
  double chi2 = 0.0;
  int dof = 0;

  double model(double voltage) const;
};

/// Fits the fringe by scanning v_pi on a grid, solving the remaining
/// parameters linearly at each grid value, and refining the best bracket.
/// Throws FitError for fewer than six points, non-positive sigmas, a zero
/// voltage span or a singular system.
FringeFit fit_fringe(std::span<const FringePoint> points);

/// Wald-Wolfowitz runs statistics of the residual signs of a fit.
struct RunsStatistic {
  int runs = 0;
  double expected = 0.0;
  double sd = 0.0;

  /// |runs - expected| as a fraction of expected.
  double relative_deviation() const;
};

RunsStatistic residual_runs(std::span<const FringePoint> points, const FringeFit& fit);

struct TimeseriesSummary {
  int bins = 0;
  double mean_d1 = 0.0;  // counts/s
  double sd_d1 = 0.0;
  double mean_d2 = 0.0;
  double sd_d2 = 0.0;
  double mean_raw_visibility = 0.0;
  double sd_raw_visibility = 0.0;
  double mean_net_visibility = 0.0;
  double sd_net_visibility = 0.0;
  double mean_propagated_sigma = 0.0;  // mean per-bin Poisson sigma of the net visibility
};

/// Statistics over the records lying entirely inside [t0, t1]. Standard
/// deviations are sample deviations (zero for a single bin). Throws
/// std::invalid_argument when the window selects no record.
TimeseriesSummary summarize_timeseries(std::span<const detection::CountRecord> records,
                                       double t0_s, double t1_s, double dark_rate1,
                                       double dark_rate2);

/// Shape of a gate-delay sweep across a modulator pulse.
struct InsetShape {
  double baseline = 0.0;
  double plateau = 0.0;
  double flat_top_ns = 0.0;   // plateau delays widened by the gate width
  double plateau_start_ns = 0.0;
  double plateau_end_ns = 0.0;
  std::vector<double> lobe_delays_ns;
  std::vector<double> lobe_amplitudes;  // |value - baseline| at each ringing lobe
  bool ringing_decays = false;          // at least two lobes, strictly decreasing
};

/// Finds the flat top (the longest run of samples spanning at most
/// flat_tolerance * contrast, at least half the contrast from baseline) and
/// the ringing lobes after it (local maxima of the deviation above
/// floor_fraction * contrast). The first sample is taken as baseline and
/// contrast is the largest deviation from it.
InsetShape analyze_inset(std::span<const double> delays_ns, std::span<const double> values,
                         double gate_width_ns, double flat_tolerance = 0.01,
                         double floor_fraction = 1e-3);

}  // namespace mzlock::analysis
