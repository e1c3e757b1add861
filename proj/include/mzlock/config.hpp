#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mzlock/control.hpp"
#include "mzlock/detection.hpp"
#include "mzlock/errors.hpp"
#include "mzlock/plant.hpp"

namespace mzlock::harness {

enum class TimelineEventKind { kControlOn, kControlOff, kSetPmVoltage, kEnd };

struct TimelineEvent {
  TimelineEventKind kind = TimelineEventKind::kEnd;
  double time_s = 0.0;
  // Only for kSetPmVoltage; empty means "align to a fringe extremum".
  std::optional<double> voltage;

  bool operator==(const TimelineEvent&) const = default;
};

struct Timeline {
  std::vector<TimelineEvent> events{
      {TimelineEventKind::kControlOn, 0.0, std::nullopt},
      {TimelineEventKind::kControlOff, 250.0, std::nullopt},
      {TimelineEventKind::kEnd, 300.0, std::nullopt},
  };
  std::optional<double> initial_pm_voltage;  // empty: align automatically

  /// Time of the end event, or of the last event if there is none.
  double end_time() const;
  /// Drops events at or after t and appends an end event at t.
  void set_end(double t_s);

  bool operator==(const Timeline&) const = default;
};

struct ScanSpec {
  double v_start = 0.0;
  double v_end = 6.8;
  int points = 15;
  double dwell_s = 10.0;
  double settle_s = 2.0;  // lock acquisition before the first point
  double monitor_tolerance = 0.02;

  bool operator==(const ScanSpec&) const = default;
};

struct InsetSpec {
  double delay_start_ns = -5.0;
  double delay_end_ns = 60.0;
  double step_ns = 0.5;
  double dwell_s = 1.0;
  double settle_s = 0.2;
  double voltage = 6.8;

  int points() const;
  double delay(int i) const { return delay_start_ns + step_ns * i; }

  bool operator==(const InsetSpec&) const = default;
};

struct ChannelParams {
  double launch_dbm = -17.0;   // classical control channel launch power
  double isolation_db = 100.0;  // classical-to-quantum isolation

  bool operator==(const ChannelParams&) const = default;
};

struct SimConfig {
  plant::OpticalParams optics;
  plant::NoiseParams noise;
  plant::PmParams pm;
  plant::StretcherParams stretcher;
  control::ControllerParams controller;
  detection::DetectorParams d1;
  detection::DetectorParams d2 = [] {
    detection::DetectorParams d;
    d.dark_prob = 4.14e-5;
    return d;
  }();
  double mu = 0.1;
  ChannelParams channel;
  Timeline scenario;
  ScanSpec scan;
  InsetSpec inset;
  std::uint64_t seed = 1;
  double bin_duration_s = 1.0;
  double dt_s = 20e-6;

  detection::SourceParams source() const { return {mu, optics.post_loss_db()}; }

  bool operator==(const SimConfig&) const = default;
};

/// Every violated invariant, keyed by its configuration path.
std::vector<ValidationIssue> validation_issues(const SimConfig& cfg);

/// Throws ValidationError listing every issue.
void validate(const SimConfig& cfg);

/// Parses flat `key = value` lines with `#` comments. Keys not set keep
/// their defaults. Throws ParseError (with line number) for malformed lines,
/// unknown or repeated keys, and unparsable values; ValidationError when the
/// resulting configuration violates an invariant.
SimConfig parse_config(std::string_view text);

SimConfig load_config(const std::string& path);

/// Every key with its current value, one per line, preceded by a comment
/// describing it. parse_config(format_config(c)) == c.
std::string format_config(const SimConfig& cfg);

std::string format_events(const std::vector<TimelineEvent>& events);
std::vector<TimelineEvent> parse_events(std::string_view text);

}  // namespace mzlock::harness
