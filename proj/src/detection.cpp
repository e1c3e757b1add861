#include "mzlock/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace mzlock::detection {

ClickModel make_click_model(const SourceParams& src, const DetectorParams& det) {
  const double transmission = std::pow(10.0, -src.post_path_loss_db / 10.0);
  return {src.mu * transmission * det.efficiency, det.dark_prob};
}

double gate_click_probability(const SourceParams& src, const DetectorParams& det,
                              double port_fraction) {
  if (port_fraction < 0.0 || port_fraction > 1.0) {
    throw std::invalid_argument("gate_click_probability: port fraction outside [0, 1]");
  }
  return make_click_model(src, det).probability(port_fraction);
}

std::int64_t sample_counts(double p, std::int64_t n_gates, RandomStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_counts: p outside [0, 1]");
  if (n_gates < 0) throw std::invalid_argument("sample_counts: negative gate count");
  return rng.binomial(n_gates, p);
}

double gate_pm_overlap(const DetectorParams& det, const plant::PmParams& pm,
                       double extra_delay_ns) {
  const double start = det.gate_offset_ns + extra_delay_ns;
  if (!(det.gate_width_ns > 0.0)) return pm.envelope(start);
  return pm.envelope_integral(start, start + det.gate_width_ns) / det.gate_width_ns;
}

double crosstalk_click_probability(double launch_dbm, double isolation_db, double lambda_nm,
                                   const DetectorParams& det) {
  if (isolation_db < 0.0) {
    throw std::invalid_argument("crosstalk_click_probability: negative isolation");
  }
  const double leaked_w = 1e-3 * std::pow(10.0, (launch_dbm - isolation_db) / 10.0);
  const double photon_energy_j = plant::kPlanck * plant::kSpeedOfLight / (lambda_nm * 1e-9);
  const double flux = leaked_w / photon_energy_j;
  return flux * det.gate_width_ns * 1e-9 * det.efficiency;
}

}  // namespace mzlock::detection
