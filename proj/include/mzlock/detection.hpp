#pragma once

#include <cmath>
#include <cstdint>

#include "mzlock/plant.hpp"
#include "mzlock/rng.hpp"

/// Gated single-photon detection: click probabilities, sampled counts and
/// the timing overlap between the detector gate and the modulator pulse.
namespace mzlock::detection {

struct DetectorParams {
  double efficiency = 0.15;
  double dark_prob = 9.33e-6;  // per gate
  double gate_width_ns = 2.5;
  double rep_rate_hz = 166e3;
  double sync_delay_us = 5.8;
  double gate_offset_ns = 0.0;  // gate start relative to the PM leading edge

  /// Dark counts per second at the configured repetition rate.
  double dark_rate() const { return dark_prob * rep_rate_hz; }

  bool operator==(const DetectorParams&) const = default;
};

struct SourceParams {
  double mu = 0.1;  // mean photon number per detection window
  double post_path_loss_db = 3.1;

  bool operator==(const SourceParams&) const = default;
};

/// One integration bin of detector counts and monitor level.
struct CountRecord {
  double t_start_s = 0.0;
  double duration_s = 0.0;
  std::int64_t counts_d1 = 0;
  std::int64_t counts_d2 = 0;
  double mean_pd_level = 0.0;
  bool control_enabled = false;
  double pm_voltage_v = 0.0;

  bool operator==(const CountRecord&) const = default;
};

/// Click probability as a function of port fraction for one detector, with
/// the loss and efficiency factors folded into a single scale.
struct ClickModel {
  double scale = 0.0;  // mean detected photons per gate at port fraction 1
  double dark = 0.0;

  // 1 - (1 - dark) exp(-scale f), written to stay exact at zero light.
  double probability(double port_fraction) const {
    return dark - (1.0 - dark) * std::expm1(-scale * port_fraction);
  }
};

ClickModel make_click_model(const SourceParams& src, const DetectorParams& det);

/// Threshold-detector click probability for one gate:
/// p = 1 - (1 - dark_prob) exp(-mu f 10^(-loss/10) eta).
double gate_click_probability(const SourceParams& src, const DetectorParams& det,
                              double port_fraction);

/// Binomial number of clicks in n_gates gates of click probability p.
std::int64_t sample_counts(double p, std::int64_t n_gates, RandomStream& rng);

/// Mean of the PM pulse envelope over the detector gate, with the gate
/// starting at det.gate_offset_ns + extra_delay_ns after the leading edge.
double gate_pm_overlap(const DetectorParams& det, const plant::PmParams& pm,
                       double extra_delay_ns = 0.0);

/// Expected detections per gate caused by classical light leaking through
/// the channel isolation. Linear in the leaked flux, so only meaningful as a
/// probability while it is much smaller than one.
double crosstalk_click_probability(double launch_dbm, double isolation_db, double lambda_nm,
                                   const DetectorParams& det);

}  // namespace mzlock::detection
