#include "csopt/baselines.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "csopt/estimators.hpp"
#include "csopt/rng.hpp"

namespace csopt {

namespace {

constexpr double kDivergenceNorm = 1e12;

void check_finite(const VectorXd& x, const Trace& trace) {
  if (!x.allFinite() || x.norm() > kDivergenceNorm) {
    Trace partial = trace;
    partial.aborted = true;
    throw DivergenceError("baseline iterate diverged", std::move(partial));
  }
}

TraceRow unconstrained_row(const CompositionProblem& problem, const Regularizer& regularizer,
                           const ReferenceSolution* reference, int epoch, long long oracle_calls,
                           const VectorXd& x, std::chrono::steady_clock::time_point t0) {
  OracleLedger scratch;
  TraceRow row;
  row.epoch = epoch;
  row.oracle_calls = oracle_calls;
  row.objective = composite_value(problem, scratch, x) + regularizer.value(x);
  row.feasibility = 0.0;
  if (reference && reference->reliable) row.objective_gap = row.objective - reference->objective;
  row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return row;
}

}  // namespace

void BaselineConfig::validate() const {
  if (steps < 1 || K < 1 || N < 1 || S < 1)
    throw std::invalid_argument("baseline budgets must be >= 1");
  if (!(step_c > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("baseline stepsizes must be positive");
  if (trace_every < 1) throw std::invalid_argument("trace_every must be >= 1");
}

RunResult run_sgd(const CompositionProblem& problem, const Regularizer& regularizer,
                  const BaselineConfig& config, const ReferenceSolution* reference) {
  problem.validate();
  config.validate();
  if (!regularizer.smooth())
    throw std::invalid_argument("run_sgd supports smooth regularizers only");

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  result.trace.algorithm = "sgd";
  OracleLedger& ledger = result.ledger;

  Rng rng(config.seed);
  const VectorXd cum_outer = cumulative_weights(problem.outer_weights);
  VectorXd x = config.x0 ? *config.x0 : VectorXd::Zero(problem.q);

  for (long long t = 1; t <= config.steps; ++t) {
    // exact g(x) and dg(x) by full enumeration, then one sampled outer term
    VectorXd g = VectorXd::Zero(problem.r);
    MatrixXd jac = MatrixXd::Zero(problem.r, problem.q);
    for (int j = 0; j < problem.m; ++j) {
      g += problem.inner_weights[j] * problem.inner_value(j, x);
      jac += problem.inner_weights[j] * problem.inner_jacobian(j, x);
    }
    ledger.inner_value += problem.m;
    ledger.inner_jacobian += problem.m;
    ledger.paper += 2LL * problem.m;

    const int i = rng.sample(cum_outer);
    const VectorXd grad = jac.transpose() * problem.outer_gradient(i, g);
    ledger.outer_gradient += 1;
    ledger.paper += 1;

    const double alpha = config.step_schedule == StepSchedule::Constant
                             ? config.step_c
                             : config.step_c / std::sqrt(static_cast<double>(t));
    x -= alpha * (grad + regularizer.gradient(x));
    check_finite(x, result.trace);

    if (t % config.trace_every == 0 || t == config.steps) {
      result.trace.rows.push_back(unconstrained_row(problem, regularizer, reference,
                                                    static_cast<int>(t), ledger.paper, x, t0));
      const auto& row = result.trace.rows.back();
      if (config.stop_tolerance && row.objective_gap &&
          *row.objective_gap <= *config.stop_tolerance)
        break;
    }
  }

  result.x = x;
  result.w = x;
  result.lambda = VectorXd::Zero(0);
  return result;
}

RunResult run_comp_svrg(const CompositionProblem& problem, const Regularizer& regularizer,
                        const BaselineConfig& config, const ReferenceSolution* reference) {
  problem.validate();
  config.validate();
  if (!regularizer.smooth())
    throw std::invalid_argument("run_comp_svrg supports smooth regularizers only");

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  result.trace.algorithm = "comp-svrg";
  OracleLedger& ledger = result.ledger;

  Rng rng(config.seed);
  const VectorXd cum_inner = cumulative_weights(problem.inner_weights);
  const VectorXd cum_outer = cumulative_weights(problem.outer_weights);

  VectorXd x_tilde = config.x0 ? *config.x0 : VectorXd::Zero(problem.q);
  std::vector<int> batch(static_cast<std::size_t>(config.N));

  for (int s = 1; s <= config.S; ++s) {
    const ReferenceCache cache = make_reference_cache(problem, ledger, x_tilde, s - 1);
    VectorXd x = x_tilde;
    VectorXd sum_x = VectorXd::Zero(problem.q);

    for (int k = 0; k < config.K; ++k) {
      for (int& b : batch) b = rng.sample(cum_inner);
      const VectorXd g_hat = minibatch_inner_estimate(problem, ledger, cache, x, batch);
      const int i_k = rng.sample(cum_outer);
      const int j_k = rng.sample(cum_inner);
      const VectorXd grad = vr_gradient_biased(problem, ledger, cache, x, i_k, j_k, g_hat);

      x -= config.eta * (grad + regularizer.gradient(x));
      check_finite(x, result.trace);
      sum_x += x;
    }

    x_tilde = sum_x / static_cast<double>(config.K);
    result.trace.rows.push_back(
        unconstrained_row(problem, regularizer, reference, s, ledger.paper, x_tilde, t0));
    const auto& row = result.trace.rows.back();
    if (config.stop_tolerance && row.objective_gap && *row.objective_gap <= *config.stop_tolerance)
      break;
  }

  result.x = x_tilde;
  result.w = x_tilde;
  result.lambda = VectorXd::Zero(0);
  return result;
}

}  // namespace csopt
