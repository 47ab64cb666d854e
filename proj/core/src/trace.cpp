#include "csopt/trace.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace csopt {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed numeric field: '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

constexpr const char* kHeader =
    "run_id,algorithm,aborted,epoch,oracle_calls,objective,objective_gap,bregman_gap,"
    "feasibility,wall_ns";

}  // namespace

std::string trace_to_csv(const Trace& trace) {
  std::ostringstream out;
  out << kHeader << '\n';
  for (const TraceRow& row : trace.rows) {
    out << trace.run_id << ',' << trace.algorithm << ',' << (trace.aborted ? 1 : 0) << ','
        << row.epoch << ',' << row.oracle_calls << ',' << format_double(row.objective) << ','
        << (row.objective_gap ? format_double(*row.objective_gap) : std::string()) << ','
        << (row.bregman_gap ? format_double(*row.bregman_gap) : std::string()) << ','
        << format_double(row.feasibility) << ',' << row.wall_ns << '\n';
  }
  return out.str();
}

Trace trace_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file");
  if (split_csv_line(line).size() != 10) throw std::runtime_error("unexpected trace header");

  Trace trace;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 10) throw std::runtime_error("malformed trace row: '" + line + "'");
    if (first) {
      trace.run_id = f[0];
      trace.algorithm = f[1];
      trace.aborted = f[2] == "1";
      first = false;
    }
    TraceRow row;
    row.epoch = static_cast<int>(parse_double(f[3]));
    row.oracle_calls = static_cast<long long>(parse_double(f[4]));
    row.objective = parse_double(f[5]);
    if (!f[6].empty()) row.objective_gap = parse_double(f[6]);
    if (!f[7].empty()) row.bregman_gap = parse_double(f[7]);
    row.feasibility = parse_double(f[8]);
    row.wall_ns = static_cast<long long>(parse_double(f[9]));
    trace.rows.push_back(row);
  }
  return trace;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out << trace_to_csv(trace);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Trace read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return trace_from_csv(buf.str());
}

RateFit fit_rate(const Trace& trace, int from_epoch, int to_epoch, bool use_bregman) {
  std::vector<std::pair<double, double>> points;
  int lo = to_epoch, hi = from_epoch;
  for (const TraceRow& row : trace.rows) {
    if (row.epoch < from_epoch || row.epoch > to_epoch) continue;
    const auto& gap = use_bregman ? row.bregman_gap : row.objective_gap;
    if (!gap || !(*gap > 0.0)) continue;  // shrink the window past unusable rows
    points.emplace_back(static_cast<double>(row.epoch), std::log10(*gap));
    lo = std::min(lo, row.epoch);
    hi = std::max(hi, row.epoch);
  }
  if (points.size() < 2) throw std::runtime_error("fit_rate: fewer than two positive gaps in window");

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double num = static_cast<double>(points.size());
  for (auto [x, y] : points) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double var_x = sxx - sx * sx / num;
  const double var_y = syy - sy * sy / num;
  const double cov = sxy - sx * sy / num;
  RateFit fit;
  fit.slope = cov / var_x;
  fit.r2 = var_y > 0.0 ? (cov * cov) / (var_x * var_y) : 1.0;
  fit.used_from = lo;
  fit.used_to = hi;
  return fit;
}

}  // namespace csopt
