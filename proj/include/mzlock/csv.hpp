#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mzlock/detection.hpp"
#include "mzlock/simulation.hpp"

// CSV emission for the scenario outputs. Numbers carry 9 significant
// digits, counts are written as integers, and every line ends in '\n'.
namespace mzlock::harness {

inline constexpr std::string_view kTimeseriesHeader =
    "t_start_s,duration_s,counts_d1,counts_d2,mean_pd_level,control_enabled,pm_voltage_v";
inline constexpr std::string_view kFringeHeader = "voltage_v,mean_d1,sd_d1,mean_d2,sd_d2";
inline constexpr std::string_view kInsetHeader =
    "delay_ns,envelope,rate_d1,rate_d2,expected_d1,expected_d2";
inline constexpr std::string_view kEventsHeader = "time_s,event,detail";

std::string timeseries_csv(std::span<const detection::CountRecord> records);
std::string fringe_csv(std::span<const FringeRow> rows);
std::string inset_csv(std::span<const InsetRow> rows);
std::string events_csv(std::span<const SimEvent> events);

/// Writes contents to path, throwing IoError with the path on failure.
void write_text(const std::string& path, std::string_view contents);

void write_csv(std::span<const detection::CountRecord> records, const std::string& path);
void write_csv(std::span<const FringeRow> rows, const std::string& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Splits simple comma-separated text (no quoting).
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::string& path);

/// Inverse of timeseries_csv.
std::vector<detection::CountRecord> parse_timeseries_csv(std::string_view text);

}  // namespace mzlock::harness
