// Command-line front end: run, scan, inset, validate, print-defaults.
//
// Exit codes: 0 success, 1 invalid configuration or usage, 2 runtime failure
// (lock lost, fit failure), 3 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mzlock/analysis.hpp"
#include "mzlock/config.hpp"
#include "mzlock/csv.hpp"
#include "mzlock/detection.hpp"
#include "mzlock/errors.hpp"
#include "mzlock/simulation.hpp"

namespace fs = std::filesystem;
using namespace mzlock;
using namespace mzlock::harness;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kInvalid = 1, kRuntime = 2, kIo = 3 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<double> duration;
  bool quiet = false;
  bool gnuplot = false;
};

SimConfig load(const Options& opt) {
  SimConfig cfg = opt.config_path.empty() ? parse_config("") : load_config(opt.config_path);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.duration) cfg.scenario.set_end(*opt.duration);
  validate(cfg);
  return cfg;
}

std::string output_path(const Options& opt, const std::string& name) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw IoError(opt.out_dir, "cannot create output directory: " + ec.message());
  return (fs::path(opt.out_dir) / name).string();
}

json fit_json(const analysis::FringeFit& f) {
  return {{"amplitude", f.amplitude},   {"v_pi", f.v_pi_fit},
          {"v_pi_sigma", f.v_pi_sigma}, {"phi0", f.phi0},
          {"visibility", f.visibility}, {"visibility_sigma", f.visibility_sigma},
          {"r_squared", f.r_squared},   {"chi2", f.chi2},
          {"dof", f.dof}};
}

json summary_json(const analysis::TimeseriesSummary& s) {
  return {{"bins", s.bins},
          {"mean_d1", s.mean_d1},
          {"sd_d1", s.sd_d1},
          {"mean_d2", s.mean_d2},
          {"sd_d2", s.sd_d2},
          {"mean_raw_visibility", s.mean_raw_visibility},
          {"sd_raw_visibility", s.sd_raw_visibility},
          {"mean_net_visibility", s.mean_net_visibility},
          {"sd_net_visibility", s.sd_net_visibility},
          {"mean_propagated_sigma", s.mean_propagated_sigma}};
}

int cmd_run(const Options& opt) {
  const SimConfig cfg = load(opt);
  const auto result = run_scenario(cfg);
  write_csv(result.records, output_path(opt, "timeseries.csv"));
  write_text(output_path(opt, "events.csv"), events_csv(result.events));

  // Locked window: from 10 s after the first control_on to the next control_off.
  std::optional<double> t_on, t_off;
  for (const auto& e : cfg.scenario.events) {
    if (e.kind == TimelineEventKind::kControlOn && !t_on) t_on = e.time_s;
    if (e.kind == TimelineEventKind::kControlOff && t_on && !t_off) t_off = e.time_s;
  }
  const double end = cfg.scenario.end_time();
  json summary = {{"seed", cfg.seed}, {"aligned_pm_voltage", result.aligned_pm_voltage},
                  {"lock_lost", result.lock_lost}};
  const double dark1 = cfg.d1.dark_rate();
  const double dark2 = cfg.d2.dark_rate();
  auto window = [&](const char* name, double a, double b) {
    if (b - a < cfg.bin_duration_s) return;
    const auto s = analysis::summarize_timeseries(result.records, a, b, dark1, dark2);
    summary[name] = summary_json(s);
    summary[name]["window"] = {a, b};
    if (!opt.quiet) {
      std::cout << name << " [" << a << ", " << b << "] s: net visibility "
                << s.mean_net_visibility << " +/- " << s.sd_net_visibility << ", D1 " << s.mean_d1
                << " c/s, D2 " << s.mean_d2 << " c/s\n";
    }
  };
  if (t_on) {
    const double stop = t_off.value_or(end);
    window("locked", std::min(*t_on + 10.0, stop - cfg.bin_duration_s), stop);
    if (t_off) window("unlocked", *t_off, end);
  } else {
    window("unlocked", 0.0, end);
  }
  const double leak = detection::crosstalk_click_probability(
      cfg.channel.launch_dbm, cfg.channel.isolation_db, cfg.optics.lambda_ph_nm, cfg.d2);
  summary["crosstalk_click_probability"] = leak;
  summary["crosstalk_below_dark_floor"] = leak < std::min(cfg.d1.dark_prob, cfg.d2.dark_prob);
  write_text(output_path(opt, "summary.json"), summary.dump(2) + "\n");

  if (opt.gnuplot) {
    write_text(output_path(opt, "timeseries.gp"),
               "set datafile separator ','\n"
               "set xlabel 'time (s)'\nset ylabel 'counts per bin'\n"
               "plot 'timeseries.csv' using 1:3 skip 1 with lines title 'D1', \\\n"
               "     '' using 1:4 skip 1 with lines title 'D2'\n");
  }
  if (result.lock_lost) {
    std::cerr << "mzlock: lock lost during run\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_scan(const Options& opt) {
  const SimConfig cfg = load(opt);
  const auto result = scan_voltage(cfg);
  write_csv(result.rows, output_path(opt, "fringe.csv"));
  write_text(output_path(opt, "events.csv"), events_csv(result.events));
  json summary = {{"seed", cfg.seed},
                  {"aborted", result.aborted},
                  {"points", result.rows.size()},
                  {"setpoint", result.setpoint},
                  {"max_monitor_deviation", result.max_monitor_deviation}};
  if (result.fit_d1) summary["fit_d1"] = fit_json(*result.fit_d1);
  if (result.fit_d2) summary["fit_d2"] = fit_json(*result.fit_d2);
  write_text(output_path(opt, "summary.json"), summary.dump(2) + "\n");
  if (opt.gnuplot) {
    write_text(output_path(opt, "fringe.gp"),
               "set datafile separator ','\n"
               "set xlabel 'PM voltage (V)'\nset ylabel 'counts/s'\n"
               "plot 'fringe.csv' using 1:2:3 skip 1 with yerrorbars title 'D1', \\\n"
               "     '' using 1:4:5 skip 1 with yerrorbars title 'D2'\n");
  }
  if (result.aborted) {
    std::cerr << "mzlock: scan aborted after " << result.rows.size() << " points\n";
    return kRuntime;
  }
  if (!opt.quiet) {
    for (const auto& [name, fit] : {std::pair{"D1", *result.fit_d1}, std::pair{"D2", *result.fit_d2}}) {
      std::cout << name << ": v_pi " << fit.v_pi_fit << " V, net visibility " << fit.visibility
                << " +/- " << fit.visibility_sigma << ", r^2 " << fit.r_squared << "\n";
    }
  }
  return kOk;
}

int cmd_inset(const Options& opt) {
  const SimConfig cfg = load(opt);
  const auto result = inset_sweep(cfg, worker_threads_from_env());
  write_text(output_path(opt, "inset.csv"), inset_csv(result.rows));

  std::vector<double> delays, rates, envelope;
  for (const auto& r : result.rows) {
    delays.push_back(r.delay_ns);
    rates.push_back(r.expected_d1);
    envelope.push_back(r.envelope);
  }
  const auto shape = analysis::analyze_inset(delays, rates, cfg.d1.gate_width_ns);
  const auto pulse = analysis::analyze_inset(delays, envelope, cfg.d1.gate_width_ns);
  json summary = {{"seed", cfg.seed},
                  {"points", result.rows.size()},
                  {"flat_top_ns", shape.flat_top_ns},
                  {"baseline_d1", shape.baseline},
                  {"plateau_d1", shape.plateau},
                  {"ringing_lobe_delays_ns", pulse.lobe_delays_ns},
                  {"ringing_lobe_amplitudes", pulse.lobe_amplitudes},
                  {"ringing_decays", pulse.ringing_decays},
                  {"lock_lost", result.lock_lost}};
  write_text(output_path(opt, "summary.json"), summary.dump(2) + "\n");
  if (opt.gnuplot) {
    write_text(output_path(opt, "inset.gp"),
               "set datafile separator ','\n"
               "set xlabel 'gate delay (ns)'\nset ylabel 'counts/s at D1'\n"
               "plot 'inset.csv' using 1:3 skip 1 with points title 'sampled', \\\n"
               "     '' using 1:5 skip 1 with lines title 'expected'\n");
  }
  if (!opt.quiet) {
    std::cout << "flat top " << shape.flat_top_ns << " ns, D1 " << shape.baseline << " -> "
              << shape.plateau << " c/s, " << pulse.lobe_amplitudes.size() << " ringing lobes"
              << (pulse.ringing_decays ? " (decaying)" : "") << "\n";
  }
  return result.lock_lost ? kRuntime : kOk;
}

int cmd_validate(const Options& opt) {
  load(opt);
  if (!opt.quiet) std::cout << "configuration valid\n";
  return kOk;
}

int cmd_print_defaults() {
  std::cout << format_config(SimConfig{});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilized fiber Mach-Zehnder single-photon interference simulator", "mzlock"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "configuration file (key = value lines)");
    sub->add_option("--seed", opt.seed, "override the master seed");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--duration", opt.duration, "override the scenario end time (s)");
    sub->add_flag("--quiet", opt.quiet, "suppress the printed summary");
    sub->add_flag("--gnuplot", opt.gnuplot, "also write a gnuplot script");
  };
  auto* run = app.add_subcommand("run", "time series with the configured timeline");
  auto* scan = app.add_subcommand("scan", "modulator voltage fringe scan");
  auto* inset = app.add_subcommand("inset", "gate delay sweep across the modulator pulse");
  auto* check = app.add_subcommand("validate", "check a configuration");
  auto* defaults = app.add_subcommand("print-defaults", "print the default configuration");
  for (auto* sub : {run, scan, inset, check}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run) return cmd_run(opt);
    if (*scan) return cmd_scan(opt);
    if (*inset) return cmd_inset(opt);
    if (*check) return cmd_validate(opt);
    if (*defaults) return cmd_print_defaults();
  } catch (const ValidationError& e) {
    std::cerr << "mzlock: " << e.what() << "\n";
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "mzlock: " << (opt.config_path.empty() ? "config" : opt.config_path) << ": "
              << e.what() << "\n";
    return kInvalid;
  } catch (const IoError& e) {
    std::cerr << "mzlock: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "mzlock: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
