#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mzlock/analysis.hpp"
#include "mzlock/config.hpp"
#include "mzlock/control.hpp"
#include "mzlock/detection.hpp"
#include "mzlock/plant.hpp"
#include "mzlock/rng.hpp"

namespace mzlock::harness {

enum class SimEventKind {
  kCalibrated,
  kControlEnabled,
  kControlDisabled,
  kLockAcquired,
  kLockLost,
  kRangeReset,
  kPmVoltageSet,
  kScanAborted,
};

std::string_view to_string(SimEventKind kind);

struct SimEvent {
  double time_s = 0.0;
  SimEventKind kind = SimEventKind::kCalibrated;
  std::string detail;

  bool operator==(const SimEvent&) const = default;
};

/// Observables of the most recent control step.
struct StepProbe {
  double time_s = 0.0;
  double pd_level = 0.0;
  double residual_rad = 0.0;  // classical phase minus lock point, wrapped to (-pi, pi]
  double drive_v = 0.0;
  bool control_enabled = false;
};

/// One integration bin plus the expected (noise-free) counts behind it.
struct BinResult {
  detection::CountRecord record;
  double expected_d1 = 0.0;
  double expected_d2 = 0.0;
  std::int64_t gates = 0;
};

/// Steps plant, controller and detectors together at the control rate.
///
/// Gates are grouped by control step: each step carries the gates whose
/// times fall inside it and all of them see that step's phase. Random
/// streams (environment, D1, D2) derive from the master seed by label,
/// optionally prefixed so independent simulations never share a stream.
class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg, std::string_view stream_prefix = "");

  /// Sweeps the stretcher to find the fringe extrema and picks the lock slope.
  void calibrate();

  void set_control(bool enabled);
  void set_pm_voltage(double volts);

  /// Smallest modulator drive that puts the quantum-channel phase inside the
  /// gate on a fringe extremum, given the lock point chosen at calibration.
  double alignment_voltage() const;

  void step();
  BinResult run_bin(std::int64_t steps);
  std::int64_t steps_for(double seconds) const;

  const StepProbe& last() const { return probe_; }
  const std::vector<SimEvent>& events() const { return events_; }
  const control::ControllerState& controller() const { return ctl_; }
  const plant::PlantState& plant() const { return plant_; }
  double time() const { return plant_.time_s; }
  double pm_voltage() const { return pm_voltage_; }
  double lock_phase() const { return lock_phase_; }
  bool lock_lost() const { return lock_lost_; }
  std::int64_t pid_updates() const { return pid_updates_; }
  std::int64_t range_resets() const { return range_resets_; }

  /// Monitor level for a steady-state stretcher drive, plant frozen.
  double probe_monitor(double drive_v) const;

 private:
  double monitor_level(double phi_classical) const;
  void emit(SimEventKind kind, std::string detail = {});

  SimConfig cfg_;
  RandomStream env_rng_;
  RandomStream d1_rng_;
  RandomStream d2_rng_;
  plant::PlantState plant_;
  control::ControllerState ctl_;
  detection::ClickModel click1_;
  detection::ClickModel click2_;
  double q_offset_ = 0.0;
  double gate_factor1_ = 0.0;
  double gate_factor2_ = 0.0;
  double duty_ = 0.0;
  double pm_voltage_ = 0.0;
  double pm_phase_ = 0.0;  // full-amplitude modulator phase at the current drive
  double lock_phase_ = 0.0;
  double gates_per_step_ = 0.0;
  std::int64_t step_index_ = 0;
  std::int64_t pid_updates_ = 0;
  std::int64_t range_resets_ = 0;
  int in_band_run_ = 0;
  bool lock_reported_ = false;
  bool lock_lost_ = false;
  std::deque<double> pending_drive_;
  StepProbe probe_;
  std::vector<SimEvent> events_;
};

struct ScenarioResult {
  std::vector<detection::CountRecord> records;
  std::vector<SimEvent> events;
  bool lock_lost = false;
  double aligned_pm_voltage = 0.0;
  std::int64_t pid_updates = 0;
  std::int64_t range_resets = 0;
};

/// Runs the configured timeline, one record per bin. Timeline events apply
/// at bin boundaries. Validates the configuration first.
ScenarioResult run_scenario(const SimConfig& cfg);

struct FringeRow {
  double voltage_v = 0.0;
  double mean_d1 = 0.0;  // counts/s
  double sd_d1 = 0.0;    // Poisson standard error of mean_d1
  double mean_d2 = 0.0;
  double sd_d2 = 0.0;
  double mean_pd_level = 0.0;
};

struct ScanResult {
  std::vector<FringeRow> rows;
  std::optional<analysis::FringeFit> fit_d1;  // fitted on dark-subtracted rates
  std::optional<analysis::FringeFit> fit_d2;
  std::vector<SimEvent> events;
  bool aborted = false;
  double setpoint = 0.0;
  double max_monitor_deviation = 0.0;  // largest |mean pd level - setpoint| over dwells
};

/// Locks, then steps the modulator voltage in ascending order with the lock
/// engaged throughout. Aborts with partial rows if the lock is lost or a
/// dwell's mean monitor level leaves the tolerance band.
ScanResult scan_voltage(const SimConfig& cfg);

struct InsetRow {
  double delay_ns = 0.0;
  double envelope = 0.0;  // gate-averaged modulator envelope
  double rate_d1 = 0.0;   // sampled counts/s
  double rate_d2 = 0.0;
  double expected_d1 = 0.0;  // mean click rate behind the sample
  double expected_d2 = 0.0;
};

struct InsetResult {
  std::vector<InsetRow> rows;
  bool lock_lost = false;
};

/// Sweeps the detector gate delay across the modulator pulse. Every delay
/// is an independent locked simulation with its own derived streams, so the
/// result does not depend on the number of worker threads.
InsetResult inset_sweep(const SimConfig& cfg, unsigned threads = 1);

/// Hardware concurrency, capped by MZLOCK_THREADS when set.
unsigned worker_threads_from_env();

}  // namespace mzlock::harness
