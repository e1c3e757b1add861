#include "mzlock/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <thread>

#include "mzlock/errors.hpp"

namespace mzlock::harness {

using plant::kPi;
using plant::kTwoPi;

namespace {

// Monitor band and dwell used to declare the lock acquired.
constexpr double kLockBand = 0.02;
constexpr int kLockSamples = 500;

double wrap_phase(double x) {
  double r = std::remainder(x, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string_view to_string(SimEventKind kind) {
  switch (kind) {
    case SimEventKind::kCalibrated: return "calibrated";
    case SimEventKind::kControlEnabled: return "control-enabled";
    case SimEventKind::kControlDisabled: return "control-disabled";
    case SimEventKind::kLockAcquired: return "lock-acquired";
    case SimEventKind::kLockLost: return "lock-lost";
    case SimEventKind::kRangeReset: return "range-reset";
    case SimEventKind::kPmVoltageSet: return "pm-voltage-set";
    case SimEventKind::kScanAborted: return "scan-aborted";
  }
  return "unknown";
}

Simulator::Simulator(const SimConfig& cfg, std::string_view stream_prefix)
    : cfg_(cfg),
      env_rng_(cfg.seed, std::string(stream_prefix) + cfg.noise.rng_stream),
      d1_rng_(cfg.seed, std::string(stream_prefix) + "detector/d1"),
      d2_rng_(cfg.seed, std::string(stream_prefix) + "detector/d2") {
  plant_.drift_rad = cfg.noise.initial_phase_rad;
  plant_.phi_env = plant_.drift_rad + plant::oscillation_at(cfg.noise, 0.0);
  ctl_ = control::make_controller(cfg.controller, cfg.stretcher.v_lo, cfg.stretcher.v_hi);
  const auto src = cfg.source();
  click1_ = detection::make_click_model(src, cfg.d1);
  click2_ = detection::make_click_model(src, cfg.d2);
  q_offset_ = plant::quantum_phase_offset(cfg.optics);
  gate_factor1_ = detection::gate_pm_overlap(cfg.d1, cfg.pm);
  gate_factor2_ = detection::gate_pm_overlap(cfg.d2, cfg.pm);
  duty_ = std::min(1.0, cfg.pm.pulse_width_ns * 1e-9 * cfg.d1.rep_rate_hz);
  gates_per_step_ = cfg.d1.rep_rate_hz * cfg.dt_s;
  pending_drive_.assign(static_cast<std::size_t>(std::max(cfg.controller.latency_steps, 0)),
                        ctl_.output_v);
  probe_.drive_v = ctl_.output_v;
}

double Simulator::monitor_level(double phi_classical) const {
  // The photodetector averages over many repetition periods, so the pulsed
  // modulator enters only through its duty cycle.
  const double base = plant::monitor_level(cfg_.optics, phi_classical);
  if (pm_phase_ == 0.0) return base;
  return (1.0 - duty_) * base + duty_ * plant::monitor_level(cfg_.optics, phi_classical + pm_phase_);
}

double Simulator::probe_monitor(double drive_v) const {
  return monitor_level(plant_.phi_env + cfg_.stretcher.gain_rad_per_v * drive_v);
}

void Simulator::emit(SimEventKind kind, std::string detail) {
  events_.push_back({plant_.time_s, kind, std::move(detail)});
}

void Simulator::calibrate() {
  const control::MonitorProbe probe = [this](double v) { return probe_monitor(v); };
  const auto cal = control::calibrate_setpoint(probe, cfg_.stretcher.v_lo, cfg_.stretcher.v_hi,
                                               cfg_.stretcher.gain_rad_per_v,
                                               cfg_.controller.calibration_points);
  ctl_.i_min = cal.i_min;
  ctl_.i_max = cal.i_max;
  ctl_.setpoint = cal.setpoint;
  ctl_.calibrated = true;
  ctl_.slope_sign =
      control::choose_lock_slope(probe, ctl_.output_v, 0.01 * cfg_.stretcher.volts_per_fringe());
  // Stable lock where slope_sign * gain * sin(phi) > 0.
  const double gain_sign = cfg_.stretcher.gain_rad_per_v > 0.0 ? 1.0 : -1.0;
  lock_phase_ = ctl_.slope_sign * gain_sign * 0.5 * kPi;
  emit(SimEventKind::kCalibrated, "setpoint=" + fmt(cal.setpoint) + " i_min=" + fmt(cal.i_min) +
                                      " i_max=" + fmt(cal.i_max) +
                                      " slope=" + std::to_string(ctl_.slope_sign));
}

void Simulator::set_control(bool enabled) {
  if (enabled == ctl_.enabled) return;
  if (enabled && !ctl_.calibrated) {
    throw CalibrationError("control enabled before calibration");
  }
  ctl_.enabled = enabled;
  if (enabled) {
    in_band_run_ = 0;
    lock_reported_ = false;
    emit(SimEventKind::kControlEnabled);
  } else {
    emit(SimEventKind::kControlDisabled);
  }
}

void Simulator::set_pm_voltage(double volts) {
  if (!(volts >= 0.0 && volts <= cfg_.pm.v_max)) {
    throw std::invalid_argument("modulator voltage " + fmt(volts) + " V outside [0, v_max]");
  }
  pm_voltage_ = volts;
  pm_phase_ = kPi * volts / cfg_.pm.v_pi;
  emit(SimEventKind::kPmVoltageSet, "voltage=" + fmt(volts));
}

double Simulator::alignment_voltage() const {
  const double factor = gate_factor1_;
  if (!(factor > 1e-9)) return 0.0;
  // Phase still needed to reach the next multiple of pi.
  double needed = std::fmod(-(lock_phase_ + q_offset_), kPi);
  if (needed < 0.0) needed += kPi;
  const double v = needed * cfg_.pm.v_pi / (kPi * factor);
  return std::min(v, cfg_.pm.v_max);
}

std::int64_t Simulator::steps_for(double seconds) const {
  return std::llround(seconds / cfg_.dt_s);
}

void Simulator::step() { run_bin(1); }

BinResult Simulator::run_bin(std::int64_t steps) {
  BinResult out;
  out.record.t_start_s = plant_.time_s;
  out.record.pm_voltage_v = pm_voltage_;
  bool enabled_throughout = ctl_.enabled;
  double pd_sum = 0.0;

  const double dt = cfg_.dt_s;
  const double volts_per_fringe = cfg_.stretcher.volts_per_fringe();
  const double phase1 = pm_phase_ * gate_factor1_;
  const double phase2 = pm_phase_ * gate_factor2_;

  for (std::int64_t s = 0; s < steps; ++s) {
    const std::int64_t prev_gates =
        static_cast<std::int64_t>(std::floor(static_cast<double>(step_index_) * gates_per_step_));
    ++step_index_;
    const std::int64_t gates =
        static_cast<std::int64_t>(std::floor(static_cast<double>(step_index_) * gates_per_step_)) -
        prev_gates;

    plant_ = plant::step_environment(plant_, cfg_.noise, dt, env_rng_);

    double applied = ctl_.output_v;
    if (!pending_drive_.empty()) {
      pending_drive_.push_back(ctl_.output_v);
      applied = pending_drive_.front();
      pending_drive_.pop_front();
    }
    plant_ = plant::stretcher_response(plant_, applied, dt, cfg_.stretcher).state;

    const double phi_cl = plant_.classical_phase();
    const double pd = monitor_level(phi_cl);
    pd_sum += pd;

    if (gates > 0) {
      const double phi_q = phi_cl + q_offset_;
      const double f1 = std::max(0.0, plant::port_fractions(cfg_.optics, phi_q + phase1).a);
      const double f2 = std::max(0.0, plant::port_fractions(cfg_.optics, phi_q + phase2).b);
      const double p1 = click1_.probability(f1);
      const double p2 = click2_.probability(f2);
      out.record.counts_d1 += d1_rng_.binomial(gates, p1);
      out.record.counts_d2 += d2_rng_.binomial(gates, p2);
      out.expected_d1 += static_cast<double>(gates) * p1;
      out.expected_d2 += static_cast<double>(gates) * p2;
      out.gates += gates;
    }

    if (ctl_.enabled) {
      const double err = control::quadrature_error({pd, plant_.time_s}, ctl_);
      ctl_ = control::pid_update(ctl_, err, dt).state;
      ++pid_updates_;
      const auto reset = control::range_reset(ctl_, volts_per_fringe, cfg_.controller.guard_fraction);
      if (reset.outcome == control::ResetOutcome::kReset) {
        ctl_ = reset.state;
        ++range_resets_;
        emit(SimEventKind::kRangeReset, "fringes=" + std::to_string(reset.fringes));
      } else if (reset.outcome == control::ResetOutcome::kLockLost) {
        ctl_.enabled = false;
        lock_lost_ = true;
        enabled_throughout = false;
        emit(SimEventKind::kLockLost, "drive=" + fmt(ctl_.output_v));
      }
      if (ctl_.enabled && !lock_reported_) {
        in_band_run_ = std::abs(pd - ctl_.setpoint) <= kLockBand ? in_band_run_ + 1 : 0;
        if (in_band_run_ >= kLockSamples) {
          lock_reported_ = true;
          emit(SimEventKind::kLockAcquired);
        }
      }
    }

    probe_.time_s = plant_.time_s;
    probe_.pd_level = pd;
    probe_.residual_rad = wrap_phase(phi_cl - lock_phase_);
    probe_.drive_v = ctl_.output_v;
    probe_.control_enabled = ctl_.enabled;
  }

  out.record.duration_s = static_cast<double>(steps) * dt;
  out.record.mean_pd_level = steps > 0 ? pd_sum / static_cast<double>(steps) : 0.0;
  out.record.control_enabled = enabled_throughout && ctl_.enabled;
  return out;
}

ScenarioResult run_scenario(const SimConfig& cfg) {
  validate(cfg);
  ScenarioResult result;
  Simulator sim(cfg);
  sim.calibrate();
  result.aligned_pm_voltage = sim.alignment_voltage();
  sim.set_pm_voltage(cfg.scenario.initial_pm_voltage.value_or(result.aligned_pm_voltage));

  const double bin = cfg.bin_duration_s;
  const std::int64_t bins = std::llround(cfg.scenario.end_time() / bin);
  const std::int64_t steps_per_bin = sim.steps_for(bin);
  std::size_t next_event = 0;
  const auto& events = cfg.scenario.events;
  result.records.reserve(static_cast<std::size_t>(bins));

  for (std::int64_t b = 0; b < bins; ++b) {
    while (next_event < events.size() && std::llround(events[next_event].time_s / bin) <= b) {
      const auto& ev = events[next_event++];
      switch (ev.kind) {
        case TimelineEventKind::kControlOn: sim.set_control(true); break;
        case TimelineEventKind::kControlOff: sim.set_control(false); break;
        case TimelineEventKind::kSetPmVoltage:
          sim.set_pm_voltage(ev.voltage.value_or(sim.alignment_voltage()));
          break;
        case TimelineEventKind::kEnd: break;
      }
    }
    result.records.push_back(sim.run_bin(steps_per_bin).record);
  }
  result.events = sim.events();
  result.lock_lost = sim.lock_lost();
  result.pid_updates = sim.pid_updates();
  result.range_resets = sim.range_resets();
  return result;
}

ScanResult scan_voltage(const SimConfig& cfg) {
  validate(cfg);
  ScanResult result;
  Simulator sim(cfg);
  sim.calibrate();
  result.setpoint = sim.controller().setpoint;
  sim.set_pm_voltage(cfg.scan.v_start);
  sim.set_control(true);
  sim.run_bin(sim.steps_for(cfg.scan.settle_s));

  const bool acquired = std::any_of(sim.events().begin(), sim.events().end(), [](const SimEvent& e) {
    return e.kind == SimEventKind::kLockAcquired;
  });
  if (!acquired || sim.lock_lost()) {
    result.aborted = true;
  }

  const auto& sc = cfg.scan;
  const std::int64_t dwell_steps = sim.steps_for(sc.dwell_s);
  for (int i = 0; i < sc.points && !result.aborted; ++i) {
    const double v = sc.v_start + (sc.v_end - sc.v_start) * i / (sc.points - 1);
    sim.set_pm_voltage(v);
    const auto bin = sim.run_bin(dwell_steps);
    const double t = bin.record.duration_s;
    FringeRow row;
    row.voltage_v = v;
    row.mean_d1 = static_cast<double>(bin.record.counts_d1) / t;
    row.mean_d2 = static_cast<double>(bin.record.counts_d2) / t;
    // Poisson error of the mean rate; an empty dwell still carries one count of uncertainty.
    row.sd_d1 = std::sqrt(std::max<double>(static_cast<double>(bin.record.counts_d1), 1.0)) / t;
    row.sd_d2 = std::sqrt(std::max<double>(static_cast<double>(bin.record.counts_d2), 1.0)) / t;
    row.mean_pd_level = bin.record.mean_pd_level;
    result.rows.push_back(row);

    const double deviation = std::abs(bin.record.mean_pd_level - result.setpoint);
    result.max_monitor_deviation = std::max(result.max_monitor_deviation, deviation);
    if (sim.lock_lost() || deviation >= sc.monitor_tolerance) result.aborted = true;
  }

  result.events = sim.events();
  if (result.aborted) {
    result.events.push_back({sim.time(), SimEventKind::kScanAborted,
                             "points=" + std::to_string(result.rows.size())});
    return result;
  }

  std::vector<analysis::FringePoint> p1, p2;
  for (const auto& r : result.rows) {
    p1.push_back({r.voltage_v, r.mean_d1 - cfg.d1.dark_rate(), r.sd_d1});
    p2.push_back({r.voltage_v, r.mean_d2 - cfg.d2.dark_rate(), r.sd_d2});
  }
  result.fit_d1 = analysis::fit_fringe(p1);
  result.fit_d2 = analysis::fit_fringe(p2);
  return result;
}

InsetResult inset_sweep(const SimConfig& cfg, unsigned threads) {
  validate(cfg);
  const int n = cfg.inset.points();
  InsetResult result;
  result.rows.resize(static_cast<std::size_t>(n));
  std::vector<char> lost(static_cast<std::size_t>(n), 0);

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(std::max(threads, 1u));
  auto worker = [&](unsigned id) {
    try {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        const double delay = cfg.inset.delay(i);
        SimConfig c = cfg;
        c.d1.gate_offset_ns += delay;
        c.d2.gate_offset_ns += delay;
        Simulator sim(c, "inset/" + std::to_string(i) + "/");
        sim.calibrate();
        sim.set_pm_voltage(cfg.inset.voltage);
        sim.set_control(true);
        sim.run_bin(sim.steps_for(cfg.inset.settle_s));
        const auto bin = sim.run_bin(sim.steps_for(cfg.inset.dwell_s));
        const double t = bin.record.duration_s;
        auto& row = result.rows[static_cast<std::size_t>(i)];
        row.delay_ns = delay;
        row.envelope = detection::gate_pm_overlap(cfg.d1, cfg.pm, delay);
        row.rate_d1 = static_cast<double>(bin.record.counts_d1) / t;
        row.rate_d2 = static_cast<double>(bin.record.counts_d2) / t;
        row.expected_d1 = bin.expected_d1 / t;
        row.expected_d2 = bin.expected_d2 / t;
        lost[static_cast<std::size_t>(i)] = sim.lock_lost() ? 1 : 0;
      }
    } catch (...) {
      errors[id] = std::current_exception();
    }
  };

  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (count == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(worker, t);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  result.lock_lost = std::any_of(lost.begin(), lost.end(), [](char c) { return c != 0; });
  return result;
}

unsigned worker_threads_from_env() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MZLOCK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return std::min(hw, static_cast<unsigned>(v));
  }
  return hw;
}

}  // namespace mzlock::harness
