// Command line front end: runs experiments from a JSON config, fits
// convergence rates on trace CSVs, and renders comparison plots.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csopt/harness.hpp"
#include "csopt/trace.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitIo = 3;

int cmd_run(const std::string& config_path, const std::string& out_dir, int jobs) {
  csopt::ExperimentConfig config;
  try {
    config = csopt::load_experiment_config(config_path);
  } catch (const csopt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }

  csopt::ExperimentResult result;
  try {
    result = csopt::run_experiment(config, out_dir, jobs);
  } catch (const csopt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  }

  for (const csopt::RunOutcome& out : result.outcomes) {
    if (out.aborted)
      std::fprintf(stderr, "run %s diverged (partial trace written)\n", out.run_id.c_str());
    else if (!out.error.empty())
      std::fprintf(stderr, "run %s failed: %s\n", out.run_id.c_str(), out.error.c_str());
    else
      std::printf("run %s: %zu trace rows\n", out.run_id.c_str(), out.trace.rows.size());
  }
  return result.exit_code;
}

int cmd_rate(const std::string& trace_path, int from_epoch, int to_epoch, bool use_bregman) {
  csopt::Trace trace;
  try {
    trace = csopt::read_trace_csv(trace_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  }
  try {
    const csopt::RateFit fit = csopt::fit_rate(trace, from_epoch, to_epoch, use_bregman);
    std::printf("slope_log10_per_epoch=%.6g r2=%.6g window=[%d,%d]\n", fit.slope, fit.r2,
                fit.used_from, fit.used_to);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rate fit failed: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_plot(const std::string& axis, const std::string& out_path,
             const std::vector<std::string>& trace_paths) {
  const csopt::PlotAxis plot_axis =
      axis == "time" ? csopt::PlotAxis::Time : csopt::PlotAxis::Oracle;
  std::vector<csopt::Trace> traces;
  try {
    traces.reserve(trace_paths.size());
    for (const std::string& path : trace_paths) traces.push_back(csopt::read_trace_csv(path));
    csopt::emit_plot(traces, plot_axis, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained stochastic composition optimization benchmark driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("--config", config_path, "experiment JSON file")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--jobs", jobs, "max parallel runs")->check(CLI::PositiveNumber);

  std::string trace_path;
  int from_epoch = 0, to_epoch = 0;
  bool use_bregman = false;
  CLI::App* rate = app.add_subcommand("rate", "fit log10-gap slope over an epoch window");
  rate->add_option("--trace", trace_path, "trace CSV file")->required();
  rate->add_option("--from", from_epoch, "first epoch of the fit window")->required();
  rate->add_option("--to", to_epoch, "last epoch of the fit window")->required();
  rate->add_flag("--bregman", use_bregman, "fit the Bregman gap instead of the objective gap");

  std::string axis = "oracle", plot_out;
  std::vector<std::string> plot_traces;
  CLI::App* plot = app.add_subcommand("plot", "render trace CSVs as an SVG gap plot");
  plot->add_option("--axis", axis, "x axis: oracle or time")
      ->check(CLI::IsMember({"oracle", "time"}));
  plot->add_option("--out", plot_out, "output SVG path")->required();
  plot->add_option("traces", plot_traces, "trace CSV files")->required()->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed()) return cmd_run(config_path, out_dir, jobs);
  if (rate->parsed()) return cmd_rate(trace_path, from_epoch, to_epoch, use_bregman);
  return cmd_plot(axis, plot_out, plot_traces);
}
