#pragma once

#include <cstdint>

#include "csopt/problem.hpp"
#include "csopt/solver.hpp"

namespace csopt {

enum class StepSchedule { Constant, InvSqrt };

struct BaselineConfig {
  long long steps = 10000;          // SGD step budget
  double step_c = 0.1;              // constant stepsize, or c in c/sqrt(t)
  StepSchedule step_schedule = StepSchedule::InvSqrt;
  int trace_every = 100;            // SGD trace row interval
  int K = 10;                       // SVRG baseline inner iterations
  int N = 5;                        // SVRG baseline mini-batch size
  int S = 50;                       // SVRG baseline epochs
  double eta = 0.1;                 // SVRG baseline stepsize
  std::uint64_t seed = 0;
  std::optional<VectorXd> x0;
  std::optional<double> stop_tolerance;

  void validate() const;
};

// Compositional SGD on the unconstrained objective F(x) + R(x): each step
// enumerates all inner samples for an exact g(x) and dg(x), then takes a
// gradient step with one sampled outer component. 2m+1 paper queries/step.
RunResult run_sgd(const CompositionProblem& problem, const Regularizer& regularizer,
                  const BaselineConfig& config, const ReferenceSolution* reference = nullptr);

// Unconstrained compositional SVRG baseline: the mini-batch inner estimate
// plus biased variance-reduced gradient, applied as plain gradient steps
// x <- x - eta (grad_hat + grad R). Smooth regularizers only.
// 2m+n+K(2N+4) paper queries/epoch.
RunResult run_comp_svrg(const CompositionProblem& problem, const Regularizer& regularizer,
                        const BaselineConfig& config, const ReferenceSolution* reference = nullptr);

}  // namespace csopt
