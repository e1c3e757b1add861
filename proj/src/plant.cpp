#include "mzlock/plant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mzlock/errors.hpp"

namespace mzlock::plant {

double OpticalParams::fringe_visibility() const {
  const double sum = t_arm1 + t_arm2;
  if (sum <= 0.0) return 0.0;
  return 2.0 * overlap * std::sqrt(t_arm1 * t_arm2) / sum;
}

double NoiseParams::max_frequency() const {
  double f = 0.0;
  for (const auto& c : components) f = std::max(f, c.freq_hz);
  return f;
}

double PmParams::envelope(double t_rel_ns) const {
  if (t_rel_ns < 0.0) return 0.0;
  if (t_rel_ns <= pulse_width_ns) return 1.0;
  const double s = t_rel_ns - pulse_width_ns;
  const double omega = kTwoPi * ringing_freq_hz * 1e-9;  // rad/ns
  return ringing_amp * std::exp(-ringing_decay_per_ns * s) * std::sin(omega * s);
}

namespace {

// Antiderivative of exp(-a s) sin(w s), vanishing at s = 0.
double damped_sine_integral(double a, double w, double s) {
  const double denom = a * a + w * w;
  if (denom == 0.0) return 0.0;
  return (w - std::exp(-a * s) * (a * std::sin(w * s) + w * std::cos(w * s))) / denom;
}

}  // namespace

double PmParams::envelope_integral(double a_ns, double b_ns) const {
  if (b_ns < a_ns) return -envelope_integral(b_ns, a_ns);
  double total = 0.0;
  // Flat top.
  const double lo = std::max(a_ns, 0.0);
  const double hi = std::min(b_ns, pulse_width_ns);
  if (hi > lo) total += hi - lo;
  // Ringing tail.
  if (b_ns > pulse_width_ns) {
    const double s0 = std::max(a_ns, pulse_width_ns) - pulse_width_ns;
    const double s1 = b_ns - pulse_width_ns;
    const double omega = kTwoPi * ringing_freq_hz * 1e-9;
    total += ringing_amp * (damped_sine_integral(ringing_decay_per_ns, omega, s1) -
                            damped_sine_integral(ringing_decay_per_ns, omega, s0));
  }
  return total;
}

double oscillation_at(const NoiseParams& noise, double t_s) {
  double sum = 0.0;
  for (const auto& c : noise.components) {
    sum += c.amp_rad * std::sin(kTwoPi * c.freq_hz * t_s + c.phase_rad);
  }
  return sum;
}

PlantState step_environment(const PlantState& state, const NoiseParams& noise, double dt_s,
                            RandomStream& rng) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("step_environment: dt must be positive");
  const double f_max = noise.max_frequency();
  if (f_max > 0.0 && dt_s > 1.0 / (10.0 * f_max)) {
    throw std::invalid_argument("step_environment: dt does not resolve the fastest component");
  }
  if (!std::isfinite(state.drift_rad) || !std::isfinite(state.phi_env) ||
      !std::isfinite(state.time_s)) {
    throw NumericError("step_environment: non-finite plant state at t=" +
                       std::to_string(state.time_s));
  }

  PlantState next = state;
  next.time_s = state.time_s + dt_s;
  if (noise.diffusion > 0.0) {
    next.drift_rad += std::sqrt(noise.diffusion * dt_s) * rng.normal();
  }
  if (noise.components.empty()) {
    // Keep the noiseless case exactly static.
    next.phi_env = state.phi_env + (next.drift_rad - state.drift_rad);
  } else {
    next.phi_env = next.drift_rad + oscillation_at(noise, next.time_s);
  }
  return next;
}

StretcherStep stretcher_response(const PlantState& state, double drive_v, double dt_s,
                                 const StretcherParams& params) {
  if (!(params.corner_hz > 0.0)) {
    throw std::invalid_argument("stretcher_response: corner frequency must be positive");
  }
  if (!(dt_s > 0.0)) throw std::invalid_argument("stretcher_response: dt must be positive");

  StretcherStep out{state, false};
  double v = drive_v;
  if (v < params.v_lo || v > params.v_hi) {
    v = std::clamp(v, params.v_lo, params.v_hi);
    out.clamped = true;
  }
  const double target = params.gain_rad_per_v * v;
  // Exact for a drive held constant over the step.
  const double decay = std::exp(-kTwoPi * params.corner_hz * dt_s);
  out.state.phi_stretcher = target + (state.phi_stretcher - target) * decay;
  out.state.stretcher_v = v;
  return out;
}

double pm_phase(const PmParams& pm, double drive_v, double t_rel_ns) {
  if (drive_v < 0.0 || drive_v > pm.v_max) {
    throw std::invalid_argument("pm_phase: drive outside [0, v_max]");
  }
  return kPi * drive_v / pm.v_pi * pm.envelope(t_rel_ns);
}

double quantum_phase_offset(const OpticalParams& opt) {
  const double dl_m = opt.delta_l_mm * 1e-3;
  const double inv_q = 1.0 / (opt.lambda_q_nm * 1e-9);
  const double inv_ph = 1.0 / (opt.lambda_ph_nm * 1e-9);
  return kTwoPi * opt.group_index * dl_m * (inv_q - inv_ph);
}

PortFractions port_fractions(const OpticalParams& opt, double phi_total) {
  const double mean = 0.25 * (opt.t_arm1 + opt.t_arm2);
  const double swing = 0.5 * opt.overlap * std::sqrt(opt.t_arm1 * opt.t_arm2) * std::cos(phi_total);
  return {mean + swing, mean - swing};
}

double monitor_level(const OpticalParams& opt, double phi_classical) {
  return 0.5 + 0.5 * opt.fringe_visibility() * std::cos(phi_classical);
}

}  // namespace mzlock::plant
