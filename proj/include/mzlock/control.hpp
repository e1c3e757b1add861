#pragma once

#include <functional>

/// Discrete-time emulation of the quadrature phase lock.
///
/// The loop reads the normalized classical monitor level, forms an error
/// against the mid-fringe setpoint and drives the fiber stretcher through a
/// PID law. When the drive nears a rail it is wrapped back by whole fringes.
namespace mzlock::control {

struct ControllerParams {
  double kp = 0.5;     // V per unit normalized error
  double ki = 8000.0;  // V per (unit error * s)
  double kd = 0.0;     // V s per unit error
  double guard_fraction = 0.1;  // fraction of the half-range kept clear of each rail
  int latency_steps = 0;        // extra loop delay, in control steps
  int calibration_points = 4001;

  bool operator==(const ControllerParams&) const = default;
};

struct Calibration {
  double i_min = 0.0;
  double i_max = 0.0;
  double setpoint = 0.0;
};

struct MonitorSample {
  double pd_level = 0.0;  // normalized to the lossless fringe maximum
  double time_s = 0.0;
};

struct ControllerState {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double integral = 0.0;
  double prev_error = 0.0;
  double setpoint = 0.0;
  double i_min = 0.0;
  double i_max = 0.0;
  bool calibrated = false;
  // +1 locks on the slope where the monitor falls with increasing drive.
  int slope_sign = 1;
  double output_v = 0.0;
  double v_lo = -10.0;
  double v_hi = 10.0;
  bool enabled = false;

  /// Anti-windup bound on |integral|: the integral term alone may not exceed
  /// the larger rail magnitude.
  double integral_limit() const;

  bool operator==(const ControllerState&) const = default;
};

ControllerState make_controller(const ControllerParams& params, double v_lo, double v_hi);

/// Monitor level as a function of a steady-state stretcher drive voltage.
using MonitorProbe = std::function<double(double drive_v)>;

/// Sweeps the stretcher across [v_lo, v_hi] and returns the fringe extrema
/// and the mid-fringe setpoint. The sweep needs at least one full fringe
/// (gain * range >= 2 pi); otherwise CalibrationError is thrown.
Calibration calibrate_setpoint(const MonitorProbe& monitor, double v_lo, double v_hi,
                               double gain_rad_per_v, int points = 4001);

/// Dithers the drive around v0 and picks the slope sign that makes the loop
/// a negative feedback at the current operating point.
int choose_lock_slope(const MonitorProbe& monitor, double v0, double dither_v);

/// Normalized quadrature error, slope_sign * (pd - setpoint) / (i_max - i_min).
/// Throws CalibrationError if the controller is not calibrated.
double quadrature_error(const MonitorSample& sample, const ControllerState& ctl);

struct PidResult {
  ControllerState state;
  double drive_v = 0.0;
};

PidResult pid_update(const ControllerState& ctl, double error, double dt_s);

enum class ResetOutcome { kNone, kReset, kLockLost };

struct RangeResetResult {
  ControllerState state;
  ResetOutcome outcome = ResetOutcome::kNone;
  int fringes = 0;  // signed number of whole fringes removed from the drive
};

/// Wraps the drive back by whole fringes once it enters the guard band near
/// a rail. The integral is shifted with it so the next PID output continues
/// from the wrapped value.
RangeResetResult range_reset(const ControllerState& ctl, double volts_per_fringe,
                             double guard_fraction);

}  // namespace mzlock::control
