// Microbenchmarks for the hot paths: the gradient estimators, the two
// solver subproblems, and full epochs of both solver variants.

#include <benchmark/benchmark.h>

#include "csopt/estimators.hpp"
#include "csopt/problems.hpp"
#include "csopt/rng.hpp"
#include "csopt/solver.hpp"

namespace {

using namespace csopt;

GeneratedProblem quad() {
  SyntheticQuadraticSpec spec;
  spec.dim = 50;
  spec.constraints = 10;
  spec.condition = 10.0;
  spec.mu_ridge = 0.1;
  spec.seed = 1;
  return make_synthetic_quadratic(spec);
}

GeneratedProblem portfolio() {
  PortfolioSpec spec;
  spec.assets = 20;
  spec.slots = 200;
  spec.seed = 1;
  return make_portfolio(spec);
}

void BM_full_gradient(benchmark::State& state) {
  const GeneratedProblem gen = portfolio();
  OracleLedger ledger;
  const VectorXd x = VectorXd::Constant(gen.problem.q, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(full_gradient(gen.problem, ledger, x));
}
BENCHMARK(BM_full_gradient);

void BM_vr_gradient(benchmark::State& state) {
  const GeneratedProblem gen = portfolio();
  OracleLedger ledger;
  const VectorXd x_tilde = VectorXd::Constant(gen.problem.q, 0.1);
  const VectorXd x = VectorXd::Constant(gen.problem.q, 0.2);
  const ReferenceCache cache = make_reference_cache(gen.problem, ledger, x_tilde, 0);
  std::vector<int> batch{1, 5, 9, 13, 17};
  for (auto _ : state) {
    const VectorXd g_hat = minibatch_inner_estimate(gen.problem, ledger, cache, x, batch);
    benchmark::DoNotOptimize(vr_gradient_biased(gen.problem, ledger, cache, x, 3, 7, g_hat));
  }
}
BENCHMARK(BM_vr_gradient);

void BM_x_subproblem(benchmark::State& state) {
  const GeneratedProblem gen = quad();
  FactoredSpd factor(10.0, 1.0, gen.constraint.A);
  const VectorXd x = VectorXd::Constant(gen.problem.q, 0.1);
  const VectorXd lambda = VectorXd::Zero(gen.constraint.p());
  const VectorXd w = VectorXd::Zero(gen.constraint.l());
  const VectorXd grad = VectorXd::Constant(gen.problem.q, 0.3);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        solve_x_subproblem(factor, gen.constraint, 1.0, x, lambda, w, grad, 0.1));
}
BENCHMARK(BM_x_subproblem);

void BM_algorithm1_epoch(benchmark::State& state) {
  const GeneratedProblem gen = quad();
  SolverConfig cfg;
  cfg.mode = SolverMode::StronglyConvex;
  cfg.K = static_cast<int>(state.range(0));
  cfg.N = 5;
  cfg.S = 1;
  cfg.eta = 0.9 / *gen.problem.L_F;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_algorithm1(gen.problem, gen.constraint, cfg));
}
BENCHMARK(BM_algorithm1_epoch)->Arg(10)->Arg(50);

void BM_algorithm2_epoch(benchmark::State& state) {
  const GeneratedProblem gen = quad();
  SolverConfig cfg;
  cfg.mode = SolverMode::ConvexSmooth;
  cfg.K = static_cast<int>(state.range(0));
  cfg.S = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_algorithm2(gen.problem, gen.constraint, cfg));
}
BENCHMARK(BM_algorithm2_epoch)->Arg(10)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
