#include "mzlock/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mzlock::harness {

double Timeline::end_time() const {
  double t = 0.0;
  for (const auto& e : events) {
    if (e.kind == TimelineEventKind::kEnd) return e.time_s;
    t = std::max(t, e.time_s);
  }
  return t;
}

void Timeline::set_end(double t_s) {
  std::erase_if(events, [&](const TimelineEvent& e) {
    return e.time_s >= t_s || e.kind == TimelineEventKind::kEnd;
  });
  events.push_back({TimelineEventKind::kEnd, t_s, std::nullopt});
}

int InsetSpec::points() const {
  if (!(step_ns > 0.0) || delay_end_ns < delay_start_ns) return 0;
  return static_cast<int>(std::floor((delay_end_ns - delay_start_ns) / step_ns + 1e-9)) + 1;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view s) {
  s = trim(s);
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string format_components(const std::vector<plant::OscComponent>& comps) {
  if (comps.empty()) return "none";
  std::string out;
  for (const auto& c : comps) {
    if (!out.empty()) out += ", ";
    out += format_real(c.freq_hz) + ":" + format_real(c.amp_rad) + ":" + format_real(c.phase_rad);
  }
  return out;
}

std::vector<plant::OscComponent> parse_components(std::string_view s) {
  s = trim(s);
  std::vector<plant::OscComponent> comps;
  if (s.empty() || s == "none") return comps;
  for (auto item : split(s, ',')) {
    const auto fields = split(item, ':');
    if (fields.size() != 3) {
      throw std::invalid_argument("component '" + std::string(item) +
                                  "' is not freq_hz:amp_rad:phase_rad");
    }
    comps.push_back({parse_real(fields[0]), parse_real(fields[1]), parse_real(fields[2])});
  }
  return comps;
}

std::string format_optional_voltage(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string("auto");
}

std::optional<double> parse_optional_voltage(std::string_view s) {
  s = trim(s);
  if (s == "auto") return std::nullopt;
  return parse_real(s);
}

struct Field {
  std::string key;
  std::string doc;
  std::function<void(SimConfig&, std::string_view)> set;
  std::function<std::string(const SimConfig&)> get;
};

template <class Access>
Field real_field(std::string key, std::string doc, Access access) {
  return {std::move(key), std::move(doc),
          [access](SimConfig& c, std::string_view v) { access(c) = parse_real(v); },
          [access](const SimConfig& c) { return format_real(access(c)); }};
}

template <class Int, class Access>
Field int_field(std::string key, std::string doc, Access access) {
  return {std::move(key), std::move(doc),
          [access](SimConfig& c, std::string_view v) { access(c) = parse_int<Int>(v); },
          [access](const SimConfig& c) { return std::to_string(access(c)); }};
}

void add_detector_fields(std::vector<Field>& f, const std::string& name,
                         detection::DetectorParams SimConfig::*member) {
  const std::string p = "detectors." + name + ".";
  f.push_back(real_field(p + "efficiency", "overall detection efficiency (0-1)",
                         [member](auto& c) -> auto& { return (c.*member).efficiency; }));
  f.push_back(real_field(p + "dark_prob", "dark-count probability per gate",
                         [member](auto& c) -> auto& { return (c.*member).dark_prob; }));
  f.push_back(real_field(p + "gate_width_ns", "gate window (ns)",
                         [member](auto& c) -> auto& { return (c.*member).gate_width_ns; }));
  f.push_back(real_field(p + "rep_rate_hz", "gate repetition rate (Hz)",
                         [member](auto& c) -> auto& { return (c.*member).rep_rate_hz; }));
  f.push_back(real_field(p + "sync_delay_us", "pulse-to-gate synchronization delay (us)",
                         [member](auto& c) -> auto& { return (c.*member).sync_delay_us; }));
  f.push_back(real_field(p + "gate_offset_ns",
                         "gate start relative to the modulator pulse leading edge (ns)",
                         [member](auto& c) -> auto& { return (c.*member).gate_offset_ns; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field<std::uint64_t>("seed", "master random seed",
                                         [](auto& c) -> auto& { return c.seed; }));
    f.push_back(real_field("bin_duration_s", "integration bin for time series (s)",
                           [](auto& c) -> auto& { return c.bin_duration_s; }));
    f.push_back(real_field("dt_s", "plant and controller step (s)",
                           [](auto& c) -> auto& { return c.dt_s; }));

    f.push_back(real_field("optics.lambda_q_nm", "quantum channel wavelength (nm)",
                           [](auto& c) -> auto& { return c.optics.lambda_q_nm; }));
    f.push_back(real_field("optics.lambda_ph_nm", "classical monitor wavelength (nm)",
                           [](auto& c) -> auto& { return c.optics.lambda_ph_nm; }));
    f.push_back(real_field("optics.group_index", "fiber group index",
                           [](auto& c) -> auto& { return c.optics.group_index; }));
    f.push_back(real_field("optics.delta_l_mm", "residual arm length mismatch (mm)",
                           [](auto& c) -> auto& { return c.optics.delta_l_mm; }));
    f.push_back(real_field("optics.t_arm1", "arm 1 power transmission (0-1)",
                           [](auto& c) -> auto& { return c.optics.t_arm1; }));
    f.push_back(real_field("optics.t_arm2", "arm 2 power transmission (0-1)",
                           [](auto& c) -> auto& { return c.optics.t_arm2; }));
    f.push_back(real_field("optics.overlap", "polarization mode overlap at recombination (0-1)",
                           [](auto& c) -> auto& { return c.optics.overlap; }));
    f.push_back(real_field("optics.demux_loss_db", "demultiplexer insertion loss (dB)",
                           [](auto& c) -> auto& { return c.optics.demux_loss_db; }));
    f.push_back(real_field("optics.filter_loss_db", "circulator + FBG loss before detectors (dB)",
                           [](auto& c) -> auto& { return c.optics.filter_loss_db; }));

    f.push_back(real_field("noise.diffusion", "random-walk phase diffusion (rad^2/s)",
                           [](auto& c) -> auto& { return c.noise.diffusion; }));
    f.push_back(real_field("noise.cutoff_hz", "highest allowed oscillatory frequency (Hz)",
                           [](auto& c) -> auto& { return c.noise.cutoff_hz; }));
    f.push_back({"noise.components",
                 "oscillatory components as freq_hz:amp_rad:phase_rad, comma separated, or none",
                 [](SimConfig& c, std::string_view v) { c.noise.components = parse_components(v); },
                 [](const SimConfig& c) { return format_components(c.noise.components); }});
    f.push_back(real_field("noise.initial_phase_rad", "environmental phase at t = 0 (rad)",
                           [](auto& c) -> auto& { return c.noise.initial_phase_rad; }));
    f.push_back({"noise.rng_stream", "label of the environment random stream",
                 [](SimConfig& c, std::string_view v) { c.noise.rng_stream = std::string(trim(v)); },
                 [](const SimConfig& c) { return c.noise.rng_stream; }});

    f.push_back(real_field("pm.v_pi", "phase modulator half-wave voltage (V)",
                           [](auto& c) -> auto& { return c.pm.v_pi; }));
    f.push_back(real_field("pm.v_max", "maximum modulator drive (V)",
                           [](auto& c) -> auto& { return c.pm.v_max; }));
    f.push_back(real_field("pm.pulse_width_ns", "electrical pulse width (ns)",
                           [](auto& c) -> auto& { return c.pm.pulse_width_ns; }));
    f.push_back(real_field("pm.ringing_amp", "post-pulse ringing amplitude relative to the pulse",
                           [](auto& c) -> auto& { return c.pm.ringing_amp; }));
    f.push_back(real_field("pm.ringing_freq_hz", "ringing frequency (Hz)",
                           [](auto& c) -> auto& { return c.pm.ringing_freq_hz; }));
    f.push_back(real_field("pm.ringing_decay_per_ns", "ringing decay rate (1/ns)",
                           [](auto& c) -> auto& { return c.pm.ringing_decay_per_ns; }));

    f.push_back(real_field("stretcher.gain_rad_per_v", "fiber stretcher phase per volt (rad/V)",
                           [](auto& c) -> auto& { return c.stretcher.gain_rad_per_v; }));
    f.push_back(real_field("stretcher.corner_hz", "stretcher response corner frequency (Hz)",
                           [](auto& c) -> auto& { return c.stretcher.corner_hz; }));
    f.push_back(real_field("stretcher.v_lo", "lower drive rail (V)",
                           [](auto& c) -> auto& { return c.stretcher.v_lo; }));
    f.push_back(real_field("stretcher.v_hi", "upper drive rail (V)",
                           [](auto& c) -> auto& { return c.stretcher.v_hi; }));

    f.push_back(real_field("controller.kp", "proportional gain (V per normalized error)",
                           [](auto& c) -> auto& { return c.controller.kp; }));
    f.push_back(real_field("controller.ki", "integral gain (V per normalized error second)",
                           [](auto& c) -> auto& { return c.controller.ki; }));
    f.push_back(real_field("controller.kd", "derivative gain (V s per normalized error)",
                           [](auto& c) -> auto& { return c.controller.kd; }));
    f.push_back(real_field("controller.guard_fraction",
                           "fraction of the half drive range treated as guard band at each rail",
                           [](auto& c) -> auto& { return c.controller.guard_fraction; }));
    f.push_back(int_field<int>("controller.latency_steps", "extra loop delay (control steps)",
                               [](auto& c) -> auto& { return c.controller.latency_steps; }));
    f.push_back(int_field<int>("controller.calibration_points", "points in the calibration sweep",
                               [](auto& c) -> auto& { return c.controller.calibration_points; }));

    add_detector_fields(f, "d1", &SimConfig::d1);
    add_detector_fields(f, "d2", &SimConfig::d2);

    f.push_back(real_field("source.mu", "mean photon number per detection window",
                           [](auto& c) -> auto& { return c.mu; }));
    f.push_back(real_field("channel.launch_dbm", "classical channel launch power (dBm)",
                           [](auto& c) -> auto& { return c.channel.launch_dbm; }));
    f.push_back(real_field("channel.isolation_db", "classical-to-quantum channel isolation (dB)",
                           [](auto& c) -> auto& { return c.channel.isolation_db; }));

    f.push_back({"scenario.events",
                 "timeline as kind@time_s: control_on, control_off, pm (pm@t=V or pm@t=auto), end",
                 [](SimConfig& c, std::string_view v) { c.scenario.events = parse_events(v); },
                 [](const SimConfig& c) { return format_events(c.scenario.events); }});
    f.push_back({"scenario.pm_voltage", "initial modulator drive (V), or auto to align to an extremum",
                 [](SimConfig& c, std::string_view v) {
                   c.scenario.initial_pm_voltage = parse_optional_voltage(v);
                 },
                 [](const SimConfig& c) {
                   return format_optional_voltage(c.scenario.initial_pm_voltage);
                 }});

    f.push_back(real_field("scan.v_start", "first scan voltage (V)",
                           [](auto& c) -> auto& { return c.scan.v_start; }));
    f.push_back(real_field("scan.v_end", "last scan voltage (V)",
                           [](auto& c) -> auto& { return c.scan.v_end; }));
    f.push_back(int_field<int>("scan.points", "number of scan voltages",
                               [](auto& c) -> auto& { return c.scan.points; }));
    f.push_back(real_field("scan.dwell_s", "integration time per voltage (s)",
                           [](auto& c) -> auto& { return c.scan.dwell_s; }));
    f.push_back(real_field("scan.settle_s", "lock acquisition time before the first point (s)",
                           [](auto& c) -> auto& { return c.scan.settle_s; }));
    f.push_back(real_field("scan.monitor_tolerance",
                           "largest allowed deviation of the mean monitor level from setpoint",
                           [](auto& c) -> auto& { return c.scan.monitor_tolerance; }));

    f.push_back(real_field("inset.delay_start_ns", "first gate delay (ns)",
                           [](auto& c) -> auto& { return c.inset.delay_start_ns; }));
    f.push_back(real_field("inset.delay_end_ns", "last gate delay (ns)",
                           [](auto& c) -> auto& { return c.inset.delay_end_ns; }));
    f.push_back(real_field("inset.step_ns", "gate delay step (ns)",
                           [](auto& c) -> auto& { return c.inset.step_ns; }));
    f.push_back(real_field("inset.dwell_s", "integration time per delay (s)",
                           [](auto& c) -> auto& { return c.inset.dwell_s; }));
    f.push_back(real_field("inset.settle_s", "lock acquisition time per delay (s)",
                           [](auto& c) -> auto& { return c.inset.settle_s; }));
    f.push_back(real_field("inset.voltage", "modulator drive during the delay sweep (V)",
                           [](auto& c) -> auto& { return c.inset.voltage; }));
    return f;
  }();
  return table;
}

std::string_view event_name(TimelineEventKind k) {
  switch (k) {
    case TimelineEventKind::kControlOn: return "control_on";
    case TimelineEventKind::kControlOff: return "control_off";
    case TimelineEventKind::kSetPmVoltage: return "pm";
    case TimelineEventKind::kEnd: return "end";
  }
  return "?";
}

bool on_grid(double t, double step) {
  const double n = t / step;
  return std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, std::abs(n));
}

}  // namespace

std::string format_events(const std::vector<TimelineEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    if (!out.empty()) out += ", ";
    out += std::string(event_name(e.kind)) + "@" + format_real(e.time_s);
    if (e.kind == TimelineEventKind::kSetPmVoltage) out += "=" + format_optional_voltage(e.voltage);
  }
  return out.empty() ? "none" : out;
}

std::vector<TimelineEvent> parse_events(std::string_view text) {
  text = trim(text);
  std::vector<TimelineEvent> events;
  if (text.empty() || text == "none") return events;
  for (auto item : split(text, ',')) {
    const auto at = item.find('@');
    if (at == std::string_view::npos) {
      throw std::invalid_argument("event '" + std::string(item) + "' is not kind@time");
    }
    const auto kind = trim(item.substr(0, at));
    auto rest = item.substr(at + 1);
    TimelineEvent ev;
    if (kind == "pm") {
      const auto eq = rest.find('=');
      if (eq == std::string_view::npos) {
        throw std::invalid_argument("pm event needs a voltage: pm@time=V");
      }
      ev.kind = TimelineEventKind::kSetPmVoltage;
      ev.voltage = parse_optional_voltage(rest.substr(eq + 1));
      rest = rest.substr(0, eq);
    } else if (kind == "control_on") {
      ev.kind = TimelineEventKind::kControlOn;
    } else if (kind == "control_off") {
      ev.kind = TimelineEventKind::kControlOff;
    } else if (kind == "end") {
      ev.kind = TimelineEventKind::kEnd;
    } else {
      throw std::invalid_argument("unknown event kind '" + std::string(kind) + "'");
    }
    ev.time_s = parse_real(rest);
    events.push_back(ev);
  }
  return events;
}

std::vector<ValidationIssue> validation_issues(const SimConfig& c) {
  std::vector<ValidationIssue> issues;
  auto require = [&](bool ok, std::string key, std::string msg) {
    if (!ok) issues.push_back({std::move(key), std::move(msg)});
  };
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };

  require(c.dt_s > 0.0, "dt_s", "must be positive");
  require(c.bin_duration_s > 0.0, "bin_duration_s", "must be positive");
  if (c.dt_s > 0.0 && c.bin_duration_s > 0.0) {
    require(on_grid(c.bin_duration_s, c.dt_s), "bin_duration_s",
            "must be a whole number of dt_s steps");
  }

  const auto& o = c.optics;
  require(o.lambda_q_nm > 0.0, "optics.lambda_q_nm", "must be positive");
  require(o.lambda_ph_nm > 0.0, "optics.lambda_ph_nm", "must be positive");
  require(o.group_index > 0.0, "optics.group_index", "must be positive");
  require(o.delta_l_mm >= 0.0, "optics.delta_l_mm", "must be non-negative");
  require(unit(o.t_arm1), "optics.t_arm1", "must lie in [0, 1]");
  require(unit(o.t_arm2), "optics.t_arm2", "must lie in [0, 1]");
  require(o.t_arm1 + o.t_arm2 > 0.0, "optics.t_arm1", "both arms are opaque");
  require(unit(o.overlap), "optics.overlap", "must lie in [0, 1]");
  require(o.demux_loss_db >= 0.0, "optics.demux_loss_db", "must be non-negative");
  require(o.filter_loss_db >= 0.0, "optics.filter_loss_db", "must be non-negative");

  const auto& n = c.noise;
  require(n.diffusion >= 0.0 && std::isfinite(n.diffusion), "noise.diffusion",
          "must be finite and non-negative");
  require(n.cutoff_hz > 0.0, "noise.cutoff_hz", "must be positive");
  for (const auto& comp : n.components) {
    require(comp.freq_hz > 0.0 && comp.freq_hz <= n.cutoff_hz, "noise.components",
            "frequency " + format_real(comp.freq_hz) + " Hz outside (0, cutoff]");
    require(comp.amp_rad >= 0.0, "noise.components", "amplitudes must be non-negative");
  }
  if (c.dt_s > 0.0 && n.max_frequency() > 0.0) {
    require(c.dt_s <= 1.0 / (10.0 * n.max_frequency()), "dt_s",
            "must resolve the fastest noise component (dt <= 1/(10 f_max))");
  }
  require(std::isfinite(n.initial_phase_rad), "noise.initial_phase_rad", "must be finite");

  const auto& pm = c.pm;
  require(pm.v_pi > 0.0, "pm.v_pi", "must be positive");
  require(pm.v_max > 0.0, "pm.v_max", "must be positive");
  require(pm.pulse_width_ns > 0.0, "pm.pulse_width_ns", "must be positive");
  require(pm.ringing_amp >= 0.0 && pm.ringing_amp < 1.0, "pm.ringing_amp", "must lie in [0, 1)");
  require(pm.ringing_freq_hz >= 0.0, "pm.ringing_freq_hz", "must be non-negative");
  require(pm.ringing_decay_per_ns >= 0.0, "pm.ringing_decay_per_ns", "must be non-negative");

  const auto& s = c.stretcher;
  require(s.gain_rad_per_v > 0.0, "stretcher.gain_rad_per_v", "must be positive");
  require(s.corner_hz > 0.0, "stretcher.corner_hz", "must be positive");
  require(s.v_lo <= 0.0 && s.v_hi >= 0.0 && s.v_hi > s.v_lo, "stretcher.v_lo",
          "drive range must contain 0 V and be non-empty");
  if (s.gain_rad_per_v > 0.0 && s.v_hi > s.v_lo) {
    require(s.gain_rad_per_v * (s.v_hi - s.v_lo) >= plant::kTwoPi, "stretcher.gain_rad_per_v",
            "drive range covers less than one fringe; calibration impossible");
  }

  const auto& k = c.controller;
  require(std::isfinite(k.kp), "controller.kp", "must be finite");
  require(std::isfinite(k.ki) && k.ki >= 0.0, "controller.ki", "must be finite and non-negative");
  require(std::isfinite(k.kd), "controller.kd", "must be finite");
  require(k.guard_fraction >= 0.0 && k.guard_fraction < 1.0, "controller.guard_fraction",
          "must lie in [0, 1)");
  require(k.latency_steps >= 0, "controller.latency_steps", "must be non-negative");
  require(k.calibration_points >= 3, "controller.calibration_points", "must be at least 3");

  for (const auto& [name, d] : {std::pair{"d1", &c.d1}, std::pair{"d2", &c.d2}}) {
    const std::string p = std::string("detectors.") + name + ".";
    require(unit(d->efficiency), p + "efficiency", "must lie in [0, 1]");
    require(unit(d->dark_prob), p + "dark_prob", "must lie in [0, 1]");
    require(d->gate_width_ns > 0.0, p + "gate_width_ns", "must be positive");
    require(d->rep_rate_hz > 0.0, p + "rep_rate_hz", "must be positive");
    require(d->sync_delay_us >= 0.0, p + "sync_delay_us", "must be non-negative");
    if (d->sync_delay_us > 0.0 && d->rep_rate_hz > 0.0) {
      require(d->rep_rate_hz <= 1e6 / d->sync_delay_us, p + "rep_rate_hz",
              "exceeds the rate allowed by the synchronization delay");
    }
    if (d->rep_rate_hz > 0.0 && d->gate_width_ns > 0.0) {
      require(d->gate_width_ns * 1e-9 * d->rep_rate_hz < 1.0, p + "gate_width_ns",
              "gates overlap at this repetition rate");
    }
  }
  require(c.d1.rep_rate_hz == c.d2.rep_rate_hz, "detectors.d2.rep_rate_hz",
          "both detectors share one gate clock");

  require(c.mu >= 0.0 && std::isfinite(c.mu), "source.mu", "must be finite and non-negative");
  require(c.channel.isolation_db >= 0.0, "channel.isolation_db", "must be non-negative");

  // Timeline.
  const auto& ev = c.scenario.events;
  int ends = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const auto& e = ev[i];
    require(e.time_s >= 0.0 && std::isfinite(e.time_s), "scenario.events",
            "event times must be finite and non-negative");
    if (i > 0) {
      require(e.time_s > ev[i - 1].time_s, "scenario.events",
              "event times must be strictly increasing");
    }
    if (c.bin_duration_s > 0.0) {
      require(on_grid(e.time_s, c.bin_duration_s), "scenario.events",
              "event at " + format_real(e.time_s) + " s is not on a bin boundary");
    }
    if (e.kind == TimelineEventKind::kSetPmVoltage && e.voltage) {
      require(*e.voltage >= 0.0 && *e.voltage <= pm.v_max, "scenario.events",
              "pm voltage outside [0, pm.v_max]");
    }
    if (e.kind == TimelineEventKind::kEnd) {
      ++ends;
      require(i + 1 == ev.size(), "scenario.events", "end must be the last event");
    }
  }
  require(ends == 1, "scenario.events", "exactly one end event is required");
  require(c.scenario.end_time() > 0.0, "scenario.events", "end time must be positive");
  if (c.scenario.initial_pm_voltage) {
    const double v = *c.scenario.initial_pm_voltage;
    require(v >= 0.0 && v <= pm.v_max, "scenario.pm_voltage", "outside [0, pm.v_max]");
  }

  const auto& sc = c.scan;
  require(sc.points >= 6, "scan.points", "the fringe fit needs at least 6 points");
  require(sc.v_start >= 0.0 && sc.v_start <= pm.v_max, "scan.v_start", "outside [0, pm.v_max]");
  require(sc.v_end >= 0.0 && sc.v_end <= pm.v_max, "scan.v_end", "outside [0, pm.v_max]");
  require(sc.v_end > sc.v_start, "scan.v_end", "must exceed scan.v_start");
  require(sc.dwell_s > 0.0, "scan.dwell_s", "must be positive");
  require(sc.settle_s >= 0.0, "scan.settle_s", "must be non-negative");
  require(sc.monitor_tolerance > 0.0, "scan.monitor_tolerance", "must be positive");

  const auto& in = c.inset;
  require(in.step_ns > 0.0, "inset.step_ns", "must be positive");
  require(in.delay_end_ns > in.delay_start_ns, "inset.delay_end_ns",
          "must exceed inset.delay_start_ns");
  require(in.dwell_s > 0.0, "inset.dwell_s", "must be positive");
  require(in.settle_s >= 0.0, "inset.settle_s", "must be non-negative");
  require(in.voltage >= 0.0 && in.voltage <= pm.v_max, "inset.voltage", "outside [0, pm.v_max]");
  return issues;
}

void validate(const SimConfig& cfg) {
  auto issues = validation_issues(cfg);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

SimConfig parse_config(std::string_view text) {
  SimConfig cfg;
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "missing key");

    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ParseError(line_no, "key '" + std::string(key) + "' set twice");
    }
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      throw ParseError(line_no, std::string(key) + ": " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const SimConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += "# " + f.doc + "\n";
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace mzlock::harness
