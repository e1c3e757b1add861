#include "mzlock/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mzlock/errors.hpp"
#include "mzlock/plant.hpp"

namespace mzlock::control {

double ControllerState::integral_limit() const {
  if (ki == 0.0) return 0.0;
  return std::max(std::abs(v_lo), std::abs(v_hi)) / std::abs(ki);
}

ControllerState make_controller(const ControllerParams& params, double v_lo, double v_hi) {
  ControllerState ctl;
  ctl.kp = params.kp;
  ctl.ki = params.ki;
  ctl.kd = params.kd;
  ctl.v_lo = v_lo;
  ctl.v_hi = v_hi;
  ctl.output_v = std::clamp(0.0, v_lo, v_hi);
  return ctl;
}

namespace {

// Golden-section search for an extremum of f inside [a, b].
double refine_extremum(const MonitorProbe& f, double a, double b, bool maximize) {
  const double inv_phi = 0.6180339887498949;
  const double sign = maximize ? -1.0 : 1.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = sign * f(c);
  double fd = sign * f(d);
  for (int i = 0; i < 80 && (b - a) > 1e-12 * (1.0 + std::abs(a)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = sign * f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = sign * f(d);
    }
  }
  return f(0.5 * (a + b));
}

}  // namespace

Calibration calibrate_setpoint(const MonitorProbe& monitor, double v_lo, double v_hi,
                               double gain_rad_per_v, int points) {
  if (!(v_hi > v_lo)) throw CalibrationError("calibration range is empty");
  if (std::abs(gain_rad_per_v) * (v_hi - v_lo) < plant::kTwoPi) {
    throw CalibrationError("calibration scan covers less than one full fringe");
  }
  if (points < 3) throw CalibrationError("calibration needs at least three points");

  const double step = (v_hi - v_lo) / (points - 1);
  int arg_min = 0;
  int arg_max = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double level = monitor(v_lo + step * i);
    if (!std::isfinite(level)) throw CalibrationError("non-finite monitor level during sweep");
    if (level < lo) {
      lo = level;
      arg_min = i;
    }
    if (level > hi) {
      hi = level;
      arg_max = i;
    }
  }

  auto bracket = [&](int i) {
    return std::pair{std::max(v_lo, v_lo + step * (i - 1)), std::min(v_hi, v_lo + step * (i + 1))};
  };
  auto [a0, b0] = bracket(arg_min);
  auto [a1, b1] = bracket(arg_max);
  lo = std::min(lo, refine_extremum(monitor, a0, b0, false));
  hi = std::max(hi, refine_extremum(monitor, a1, b1, true));

  if (!(hi > lo)) throw CalibrationError("no fringe observed during calibration sweep");
  return {lo, hi, 0.5 * (lo + hi)};
}

int choose_lock_slope(const MonitorProbe& monitor, double v0, double dither_v) {
  const double slope = monitor(v0 + dither_v) - monitor(v0 - dither_v);
  // Increasing drive must reduce the error, so the error sign follows the
  // negated monitor slope. A flat reading falls back to +1.
  return slope > 0.0 ? -1 : 1;
}

double quadrature_error(const MonitorSample& sample, const ControllerState& ctl) {
  if (!ctl.calibrated || !(ctl.i_max > ctl.i_min)) {
    throw CalibrationError("quadrature error requested from an uncalibrated controller");
  }
  return ctl.slope_sign * (sample.pd_level - ctl.setpoint) / (ctl.i_max - ctl.i_min);
}

PidResult pid_update(const ControllerState& ctl, double error, double dt_s) {
  if (!(dt_s > 0.0)) throw std::invalid_argument("pid_update: dt must be positive");
  if (!ctl.enabled) return {ctl, ctl.output_v};

  ControllerState next = ctl;
  const double limit = ctl.integral_limit();
  next.integral = std::clamp(ctl.integral + error * dt_s, -limit, limit);
  const double derivative = (error - ctl.prev_error) / dt_s;
  double drive = ctl.kp * error + ctl.ki * next.integral + ctl.kd * derivative;
  drive = std::clamp(drive, ctl.v_lo, ctl.v_hi);
  next.prev_error = error;
  next.output_v = drive;
  return {next, drive};
}

RangeResetResult range_reset(const ControllerState& ctl, double volts_per_fringe,
                             double guard_fraction) {
  RangeResetResult out{ctl, ResetOutcome::kNone, 0};
  const double guard = guard_fraction * 0.5 * (ctl.v_hi - ctl.v_lo);
  const double safe_lo = ctl.v_lo + guard;
  const double safe_hi = ctl.v_hi - guard;
  const double v = ctl.output_v;
  if (v >= safe_lo && v <= safe_hi) return out;

  const double period = std::abs(volts_per_fringe);
  if (!(period > 0.0) || ctl.ki == 0.0) {
    out.outcome = ResetOutcome::kLockLost;
    return out;
  }

  int k = 0;
  if (v > safe_hi) {
    k = static_cast<int>(std::ceil((v - safe_hi) / period));
  } else {
    k = -static_cast<int>(std::ceil((safe_lo - v) / period));
  }
  const double wrapped = v - k * period;
  if (wrapped < safe_lo || wrapped > safe_hi) {
    out.outcome = ResetOutcome::kLockLost;
    return out;
  }

  out.state.output_v = wrapped;
  out.state.integral = ctl.integral - k * period / ctl.ki;
  out.outcome = ResetOutcome::kReset;
  out.fringes = k;
  return out;
}

}  // namespace mzlock::control
