#pragma once

#include <optional>
#include <string>
#include <vector>

namespace csopt {

struct TraceRow {
  int epoch = 0;
  long long oracle_calls = 0;
  double objective = 0.0;
  std::optional<double> objective_gap;
  std::optional<double> bregman_gap;
  double feasibility = 0.0;
  long long wall_ns = 0;
};

struct Trace {
  std::string run_id;
  std::string algorithm;
  std::vector<TraceRow> rows;
  bool aborted = false;
};

// CSV persistence. Doubles are written with round-trip precision so that
// parse(emit(trace)) == trace exactly; locale-independent, '.' decimal point.
std::string trace_to_csv(const Trace& trace);
Trace trace_from_csv(const std::string& csv);

void write_trace_csv(const Trace& trace, const std::string& path);
Trace read_trace_csv(const std::string& path);

struct RateFit {
  double slope = 0.0;  // log10(gap) per epoch
  double r2 = 0.0;
  int used_from = 0;   // window actually used (shrunk past nonpositive gaps)
  int used_to = 0;
};

// Least-squares fit of log10(gap) against epoch over [from_epoch, to_epoch].
// Uses the Bregman gap when use_bregman is set, otherwise the objective gap.
RateFit fit_rate(const Trace& trace, int from_epoch, int to_epoch, bool use_bregman = false);

}  // namespace csopt
