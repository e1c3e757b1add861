#pragma once

#include <string>
#include <vector>

#include "mzlock/rng.hpp"

/// Physical model of the two-arm fiber interferometer.
///
/// Phases are in radians throughout. The environment contributes a slow
/// random walk plus a set of sinusoidal components, the fiber stretcher a
/// low-passed copy of its drive voltage, and the phase modulator a pulsed
/// contribution seen only inside the detector gate.
namespace mzlock::plant {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;     // J s

struct OpticalParams {
  double lambda_q_nm = 1546.12;   // quantum channel
  double lambda_ph_nm = 1547.72;  // classical monitor channel
  double group_index = 1.468;
  double delta_l_mm = 0.2;  // residual arm length mismatch
  double t_arm1 = 0.5;      // arm power transmissions
  double t_arm2 = 0.5;
  double overlap = 0.97;  // polarization mode overlap at the output coupler
  double demux_loss_db = 1.6;
  double filter_loss_db = 1.5;

  /// Contrast of the output fringe, 2 p sqrt(t1 t2) / (t1 + t2).
  double fringe_visibility() const;
  /// Loss between the output coupler and a detector.
  double post_loss_db() const { return demux_loss_db + filter_loss_db; }

  bool operator==(const OpticalParams&) const = default;
};

/// Deterministic part of the environmental phase: amp * sin(2 pi f t + phase).
struct OscComponent {
  double freq_hz = 0.0;
  double amp_rad = 0.0;
  double phase_rad = 0.0;

  bool operator==(const OscComponent&) const = default;
};

struct NoiseParams {
  double diffusion = 1.0;    // rad^2/s
  double cutoff_hz = 1000.0;  // upper bound on component frequencies
  std::vector<OscComponent> components{{100.0, 0.5, 0.0}};
  double initial_phase_rad = 1.0;  // environmental phase at t = 0
  std::string rng_stream = "environment";

  double max_frequency() const;

  bool operator==(const NoiseParams&) const = default;
};

/// Electro-optic phase modulator driven by short electrical pulses.
struct PmParams {
  double v_pi = 5.0;
  double v_max = 6.8;
  double pulse_width_ns = 10.0;
  double ringing_amp = 0.2;
  double ringing_freq_hz = 100e6;
  double ringing_decay_per_ns = 0.05;

  /// Pulse envelope at time t relative to the leading edge: 0 before the
  /// pulse, 1 on the flat top, a damped sinusoid after the trailing edge.
  double envelope(double t_rel_ns) const;

  /// Integral of the envelope over [a, b] (ns), in closed form.
  double envelope_integral(double a_ns, double b_ns) const;

  bool operator==(const PmParams&) const = default;
};

/// Piezoelectric fiber stretcher used as the feedback actuator.
struct StretcherParams {
  double gain_rad_per_v = kTwoPi;
  double corner_hz = 5000.0;
  double v_lo = -10.0;
  double v_hi = 10.0;

  /// Drive change that moves the stretcher phase by one full fringe.
  double volts_per_fringe() const { return kTwoPi / gain_rad_per_v; }

  bool operator==(const StretcherParams&) const = default;
};

struct PlantState {
  double drift_rad = 0.0;  // random-walk part of the environmental phase
  double phi_env = 0.0;    // drift plus oscillatory components
  double phi_stretcher = 0.0;
  double stretcher_v = 0.0;
  double time_s = 0.0;

  /// Phase difference seen by the classical monitor.
  double classical_phase() const { return phi_env + phi_stretcher; }

  bool operator==(const PlantState&) const = default;
};

struct StretcherStep {
  PlantState state;
  bool clamped = false;
};

struct PortFractions {
  double a = 0.0;
  double b = 0.0;
};

/// Oscillatory part of the environmental phase at time t.
double oscillation_at(const NoiseParams& noise, double t_s);

/// Advances the environmental phase by one step of length dt.
///
/// The drift receives a Wiener increment of variance diffusion * dt and the
/// oscillatory components are re-evaluated at the new time. Throws
/// std::invalid_argument when dt violates its bounds and NumericError when
/// the state is not finite.
PlantState step_environment(const PlantState& state, const NoiseParams& noise, double dt_s,
                            RandomStream& rng);

/// First-order low-pass response of the stretcher to a drive held for dt.
/// Drives outside [v_lo, v_hi] are clamped and the clamp is reported.
StretcherStep stretcher_response(const PlantState& state, double drive_v, double dt_s,
                                 const StretcherParams& params);

/// Phase imposed by the modulator at t_rel (ns) after the pulse leading edge.
double pm_phase(const PmParams& pm, double drive_v, double t_rel_ns);

/// Constant phase offset between the quantum and classical channels caused by
/// the residual arm length mismatch.
double quantum_phase_offset(const OpticalParams& opt);

/// Fractions of the input power leaving output ports A and B.
PortFractions port_fractions(const OpticalParams& opt, double phi_total);

/// Port-A power normalized to the fringe maximum possible for lossless
/// interference, i.e. 1/2 + (V/2) cos(phi) with V the fringe visibility.
double monitor_level(const OpticalParams& opt, double phi_classical);

}  // namespace mzlock::plant
