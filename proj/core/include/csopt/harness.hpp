#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "csopt/baselines.hpp"
#include "csopt/problem.hpp"
#include "csopt/problems.hpp"
#include "csopt/solver.hpp"
#include "csopt/trace.hpp"

namespace csopt {

// Bad experiment configuration (unknown keys, missing fields, bad values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReferenceSolveOptions {
  double tol = 1e-10;          // max-norm KKT residual target
  long long max_iters = 200000;
  double rho = 1.0;
  std::optional<double> eta;   // defaults to 1/L with L estimated if absent
};

// Deterministic full-gradient ADMM run to high accuracy; produces the gap
// oracle for instances without an analytic optimum. `reliable` is set only
// when the residual target was met.
ReferenceSolution reference_solve(const CompositionProblem& problem,
                                  const ConstraintSpec& constraint,
                                  const ReferenceSolveOptions& options = {});

// One requested run inside an experiment.
struct RunSpec {
  std::string id;
  std::string algo;  // "svr-admm" | "svr-admm-gc" | "sgd" | "comp-svrg"
  SolverConfig solver;
  BaselineConfig baseline;
};

enum class ReferenceMode { Auto, None };

struct ProblemSpec {
  std::string kind;  // "portfolio" | "policy-eval" | "synthetic-quadratic"
  PortfolioSpec portfolio;
  PolicyEvalSpec policy_eval;
  SyntheticQuadraticSpec quadratic;
};

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<RunSpec> runs;
  std::string output_dir = "results";
  std::uint64_t seed = 0;
  int repetitions = 1;
  ReferenceMode reference_mode = ReferenceMode::Auto;
  ReferenceSolveOptions reference_options;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

GeneratedProblem instantiate_problem(const ProblemSpec& spec);

// Outcome of one (run, repetition) cell.
struct RunOutcome {
  std::string run_id;
  std::string algorithm;
  int repetition = 0;
  Trace trace;
  OracleLedger ledger;
  bool aborted = false;
  std::string error;  // nonempty on failure other than divergence
};

struct ExperimentResult {
  std::vector<RunOutcome> outcomes;
  std::optional<ReferenceSolution> reference;
  int exit_code = 0;  // 0 ok, 1 config, 2 divergence, 3 I/O
};

// Executes every run x repetition cell (at most `jobs` in parallel), writes
// one trace CSV per cell plus summary.csv into the output directory.
// `out_override` replaces the configured output directory when nonempty.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_override,
                                int jobs);

enum class PlotAxis { Oracle, Time };

// Deterministic SVG: one log10-gap polyline per trace keyed by run_id.
// Identical traces yield byte-identical output.
std::string render_plot_svg(const std::vector<Trace>& traces, PlotAxis axis);

void emit_plot(const std::vector<Trace>& traces, PlotAxis axis, const std::string& path);

}  // namespace csopt
