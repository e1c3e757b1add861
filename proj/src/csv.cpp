#include "mzlock/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mzlock/errors.hpp"

namespace mzlock::harness {

namespace {

void put_real(std::string& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  out += buf;
}

void put_int(std::string& out, std::int64_t v) { out += std::to_string(v); }

std::string header_line(std::string_view h) { return std::string(h) + "\n"; }

}  // namespace

std::string timeseries_csv(std::span<const detection::CountRecord> records) {
  std::string out = header_line(kTimeseriesHeader);
  for (const auto& r : records) {
    put_real(out, r.t_start_s);
    out += ',';
    put_real(out, r.duration_s);
    out += ',';
    put_int(out, r.counts_d1);
    out += ',';
    put_int(out, r.counts_d2);
    out += ',';
    put_real(out, r.mean_pd_level);
    out += ',';
    out += r.control_enabled ? '1' : '0';
    out += ',';
    put_real(out, r.pm_voltage_v);
    out += '\n';
  }
  return out;
}

std::string fringe_csv(std::span<const FringeRow> rows) {
  std::string out = header_line(kFringeHeader);
  for (const auto& r : rows) {
    for (double v : {r.voltage_v, r.mean_d1, r.sd_d1, r.mean_d2}) {
      put_real(out, v);
      out += ',';
    }
    put_real(out, r.sd_d2);
    out += '\n';
  }
  return out;
}

std::string inset_csv(std::span<const InsetRow> rows) {
  std::string out = header_line(kInsetHeader);
  for (const auto& r : rows) {
    for (double v : {r.delay_ns, r.envelope, r.rate_d1, r.rate_d2, r.expected_d1}) {
      put_real(out, v);
      out += ',';
    }
    put_real(out, r.expected_d2);
    out += '\n';
  }
  return out;
}

std::string events_csv(std::span<const SimEvent> events) {
  std::string out = header_line(kEventsHeader);
  for (const auto& e : events) {
    put_real(out, e.time_s);
    out += ',';
    out += to_string(e.kind);
    out += ',';
    out += e.detail;
    out += '\n';
  }
  return out;
}

void write_text(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

void write_csv(std::span<const detection::CountRecord> records, const std::string& path) {
  write_text(path, timeseries_csv(records));
}

void write_csv(std::span<const FringeRow> rows, const std::string& path) {
  write_text(path, fringe_csv(rows));
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  bool first = true;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::vector<detection::CountRecord> parse_timeseries_csv(std::string_view text) {
  const auto table = parse_csv(text);
  std::string joined;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) joined += ',';
    joined += table.header[i];
  }
  if (joined != kTimeseriesHeader) throw std::invalid_argument("not a time-series CSV");
  std::vector<detection::CountRecord> out;
  for (const auto& row : table.rows) {
    if (row.size() != 7) throw std::invalid_argument("time-series row has wrong column count");
    detection::CountRecord r;
    r.t_start_s = std::stod(row[0]);
    r.duration_s = std::stod(row[1]);
    r.counts_d1 = std::stoll(row[2]);
    r.counts_d2 = std::stoll(row[3]);
    r.mean_pd_level = std::stod(row[4]);
    r.control_enabled = row[5] == "1";
    r.pm_voltage_v = std::stod(row[6]);
    out.push_back(r);
  }
  return out;
}

}  // namespace mzlock::harness
