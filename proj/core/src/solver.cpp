#include "csopt/solver.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "csopt/rng.hpp"

namespace csopt {

namespace {

constexpr double kDivergenceNorm = 1e12;

std::optional<double> effective_L_F(const CompositionProblem& problem, const SolverConfig& config) {
  if (config.L_F) return config.L_F;
  return problem.L_F;
}

void check_finite_state(const VectorXd& x, const VectorXd& w, const VectorXd& lambda,
                        const Trace& trace) {
  const bool bad = !x.allFinite() || !w.allFinite() || !lambda.allFinite() ||
                   x.norm() > kDivergenceNorm || w.norm() > kDivergenceNorm ||
                   lambda.norm() > kDivergenceNorm;
  if (bad) {
    Trace partial = trace;
    partial.aborted = true;
    throw DivergenceError("solver state diverged", std::move(partial));
  }
}

// Residual of the omega optimality condition for smooth R, relative to the
// iterate scale: grad R(w+) + B^T lambda_k + rho B^T (A x_k + B w+) = 0.
double omega_residual(const ConstraintSpec& constraint, double rho, const VectorXd& x_k,
                      const VectorXd& lambda_k, const VectorXd& w_next) {
  const VectorXd res = constraint.regularizer.gradient(w_next) +
                       constraint.B.transpose() *
                           (lambda_k + rho * (constraint.A * x_k + constraint.B * w_next));
  const double scale = std::max({1.0, x_k.cwiseAbs().maxCoeff(), w_next.cwiseAbs().maxCoeff(),
                                 lambda_k.cwiseAbs().maxCoeff()});
  return res.cwiseAbs().maxCoeff() / scale;
}

// Gradient-descent form of the x update after the dual step, relative to the
// iterate scale: x+ = x_k - eta_eff (grad_est + A^T lambda+).
double xdual_residual(const ConstraintSpec& constraint, const VectorXd& x_k,
                      const VectorXd& x_next, const VectorXd& lambda_next,
                      const VectorXd& grad_est, double eta_eff) {
  const VectorXd predicted =
      x_k - eta_eff * (grad_est + constraint.A.transpose() * lambda_next);
  const double scale = std::max({1.0, x_k.cwiseAbs().maxCoeff(), x_next.cwiseAbs().maxCoeff(),
                                 grad_est.cwiseAbs().maxCoeff()});
  return (x_next - predicted).cwiseAbs().maxCoeff() / scale;
}

TraceRow make_row(const CompositionProblem& problem, const ConstraintSpec& constraint,
                  const ReferenceSolution* reference, int epoch, long long oracle_calls,
                  const VectorXd& x, const VectorXd& w,
                  std::chrono::steady_clock::time_point t0) {
  // Metrics are evaluated on a scratch ledger so they never perturb the
  // algorithm's oracle accounting.
  OracleLedger scratch;
  TraceRow row;
  row.epoch = epoch;
  row.oracle_calls = oracle_calls;
  row.objective = objective_value(problem, constraint, scratch, x, w);
  row.feasibility = (constraint.A * x + constraint.B * w).norm();
  if (reference && reference->reliable) {
    GapMetrics gm = gap_metrics(problem, constraint, *reference, x, w);
    row.objective_gap = gm.objective_gap;
    row.bregman_gap = gm.bregman_gap;
  }
  row.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return row;
}

}  // namespace

void SolverConfig::validate(const CompositionProblem& problem) const {
  if (K < 1 || N < 1 || S < 1) throw std::invalid_argument("K, N, S must all be >= 1");
  if (!(rho > 0.0)) throw std::invalid_argument("rho must be positive");
  if (mode == SolverMode::StronglyConvex) {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
    const auto lf = L_F ? L_F : problem.L_F;
    if (lf && eta > 1.0 / *lf + 1e-15)
      throw std::invalid_argument("strongly convex mode requires eta <= 1/L_F");
  }
  if (mode == SolverMode::ConvexSmooth && !L_F && !problem.L_F)
    throw std::invalid_argument("ConvexSmooth mode requires the smoothness constant L_F");
}

ScheduleValue schedule(SolverMode mode, int s, int k, int K, std::optional<double> L_F) {
  if (s < 1 || k < 0 || k > K || K < 1) throw std::invalid_argument("schedule: bad (s, k, K)");
  if (mode == SolverMode::StronglyConvex)
    throw std::invalid_argument("schedule applies to the general convex modes only");

  const double sd = static_cast<double>(s);
  double eta_s = 0.0, c_start = 0.0, c_end = 0.0;
  if (mode == SolverMode::ConvexSmooth) {
    if (!L_F) throw std::invalid_argument("ConvexSmooth schedule requires L_F");
    eta_s = 1.0 / ((sd + 1.0) * *L_F);
    c_start = 1.0 / sd;
    c_end = 1.0 / (sd + 1.0);
  } else {
    eta_s = 1.0 / (sd + 1.0);
    c_start = 1.0 / std::sqrt(sd);
    c_end = 1.0 / std::sqrt(sd + 1.0);
  }

  ScheduleValue out;
  out.eta_s = eta_s;
  if (k >= K - 1) {
    out.c_k = c_end;  // covers k = K-1 and the carried-over k = K
  } else if (K == 1) {
    out.c_k = c_start;
  } else {
    const double t = static_cast<double>(k) / static_cast<double>(K - 1);
    out.c_k = c_start + (c_end - c_start) * t;
  }
  out.eta_eff = out.eta_s / out.c_k;
  return out;
}

OmegaSubproblem::OmegaSubproblem(const ConstraintSpec& constraint, double rho)
    : constraint_(constraint), rho_(rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("omega subproblem requires rho > 0");
  const MatrixXd btb = constraint.B.transpose() * constraint.B;
  const auto& reg = constraint.regularizer;
  if (reg.smooth()) {
    MatrixXd M = rho_ * btb;
    const double mu = reg.kind == Regularizer::Kind::ScaledSquaredNorm ? reg.mu : 0.0;
    M.diagonal().array() += mu;
    llt_.compute(M);
    if (llt_.info() != Eigen::Success)
      throw std::runtime_error("omega subproblem normal matrix is not positive definite");
  } else {
    const double beta = btb(0, 0);
    const double scale = std::max(1.0, btb.cwiseAbs().maxCoeff());
    const MatrixXd expected = beta * MatrixXd::Identity(btb.rows(), btb.cols());
    if ((btb - expected).cwiseAbs().maxCoeff() > 1e-10 * scale || !(beta > 0.0))
      throw std::invalid_argument(
          "nonsmooth regularizer requires B^T B to be a positive scalar multiple of I");
    beta_ = beta;
  }
}

VectorXd OmegaSubproblem::solve(const VectorXd& x_k, const VectorXd& lambda_k) const {
  const VectorXd rhs = -constraint_.B.transpose() * (lambda_k + rho_ * (constraint_.A * x_k));
  const auto& reg = constraint_.regularizer;
  switch (reg.kind) {
    case Regularizer::Kind::None:
    case Regularizer::Kind::ScaledSquaredNorm:
      return llt_.solve(rhs);
    case Regularizer::Kind::L1: {
      const VectorXd v = rhs / (rho_ * beta_);
      const double thresh = reg.tau / (rho_ * beta_);
      VectorXd w(v.size());
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double a = v[i];
        w[i] = a > thresh ? a - thresh : (a < -thresh ? a + thresh : 0.0);
      }
      return w;
    }
    case Regularizer::Kind::Custom:
      if (!reg.custom_prox) throw std::logic_error("custom regularizer without prox operator");
      return reg.custom_prox(rhs / (rho_ * beta_), 1.0 / (rho_ * beta_));
  }
  throw std::logic_error("unreachable");
}

VectorXd solve_omega_subproblem(const ConstraintSpec& constraint, double rho, const VectorXd& x_k,
                                const VectorXd& lambda_k) {
  return OmegaSubproblem(constraint, rho).solve(x_k, lambda_k);
}

VectorXd solve_x_subproblem(FactoredSpd& factor, const ConstraintSpec& constraint, double rho,
                            const VectorXd& x_k, const VectorXd& lambda_k, const VectorXd& w_next,
                            const VectorXd& grad_est, double eta_eff) {
  if (!(eta_eff > 0.0)) throw std::invalid_argument("x subproblem requires eta_eff > 0");
  factor.update(1.0 / eta_eff, rho);
  const VectorXd rhs = x_k / eta_eff - grad_est - constraint.A.transpose() * lambda_k -
                       rho * (constraint.A.transpose() * (constraint.B * w_next));
  return factor.solve(rhs);
}

VectorXd solve_x_subproblem(const ConstraintSpec& constraint, double rho, const VectorXd& x_k,
                            const VectorXd& lambda_k, const VectorXd& w_next,
                            const VectorXd& grad_est, double eta_eff) {
  if (!(eta_eff > 0.0)) throw std::invalid_argument("x subproblem requires eta_eff > 0");
  FactoredSpd factor(1.0 / eta_eff, rho, constraint.A);
  return solve_x_subproblem(factor, constraint, rho, x_k, lambda_k, w_next, grad_est, eta_eff);
}

VectorXd update_dual(double rho, const VectorXd& lambda_k, const ConstraintSpec& constraint,
                     const VectorXd& x_next, const VectorXd& w_next) {
  if (!(rho > 0.0)) throw std::invalid_argument("dual update requires rho > 0");
  return lambda_k + rho * (constraint.A * x_next + constraint.B * w_next);
}

VectorXd dual_reset(const MatrixXd& a_transpose_pinv, const VectorXd& grad_at_reference) {
  return -(a_transpose_pinv * grad_at_reference);
}

GapMetrics gap_metrics(const CompositionProblem& problem, const ConstraintSpec& constraint,
                       const ReferenceSolution& reference, const VectorXd& x, const VectorXd& w) {
  OracleLedger scratch;
  const double f_x = composite_value(problem, scratch, x);
  const double r_w = constraint.regularizer.value(w);
  const double r_star = constraint.regularizer.value(reference.w);
  const double f_star = reference.objective - r_star;

  GapMetrics out;
  out.objective_gap = f_x + r_w - reference.objective;
  out.feasibility = (constraint.A * x + constraint.B * w).norm();
  // KKT substitutions: grad F(x*) = -A^T lambda*, subgradient of R at w* is
  // -B^T lambda*.
  out.bregman_gap = f_x - f_star + (constraint.A.transpose() * reference.lambda).dot(x - reference.x) +
                    r_w - r_star + (constraint.B.transpose() * reference.lambda).dot(w - reference.w);
  return out;
}

RunResult run_algorithm1(const CompositionProblem& problem, const ConstraintSpec& constraint,
                         const SolverConfig& config, const ReferenceSolution* reference) {
  problem.validate();
  constraint.validate();
  config.validate(problem);
  if (config.mode != SolverMode::StronglyConvex)
    throw std::invalid_argument("run_algorithm1 requires StronglyConvex mode");

  const auto t0 = std::chrono::steady_clock::now();
  const int q = problem.q;
  const int l = constraint.l();

  RunResult result;
  result.trace.algorithm = "com-svr-admm-sc";
  OracleLedger& ledger = result.ledger;

  Rng rng(config.seed);
  const VectorXd cum_inner = cumulative_weights(problem.inner_weights);
  const VectorXd cum_outer = cumulative_weights(problem.outer_weights);

  VectorXd x_tilde = config.x0 ? *config.x0 : VectorXd::Zero(q);
  VectorXd w_tilde = config.w0 ? *config.w0 : VectorXd::Zero(l);

  const MatrixXd at_pinv = pseudoinverse(constraint.A.transpose());
  VectorXd lambda_tilde = VectorXd::Zero(constraint.p());

  FactoredSpd factor(1.0 / config.eta, config.rho, constraint.A);
  OmegaSubproblem omega_solver(constraint, config.rho);
  const bool smooth_reg = constraint.regularizer.smooth();
  std::vector<int> batch(static_cast<std::size_t>(config.N));

  for (int s = 1; s <= config.S; ++s) {
    // One snapshot per epoch: g and grad F at the carried-over reference
    // point, which also supplies the dual reset entering this epoch.
    const ReferenceCache cache = make_reference_cache(problem, ledger, x_tilde, s - 1);
    lambda_tilde = dual_reset(at_pinv, cache.grad_tilde);

    VectorXd x = x_tilde;
    VectorXd w = w_tilde;
    VectorXd lambda = lambda_tilde;
    VectorXd sum_x = VectorXd::Zero(q);
    VectorXd sum_w = VectorXd::Zero(l);

    for (int k = 0; k < config.K; ++k) {
      const VectorXd w_next = omega_solver.solve(x, lambda);
      if (config.check_invariants && smooth_reg)
        result.max_omega_residual = std::max(
            result.max_omega_residual, omega_residual(constraint, config.rho, x, lambda, w_next));

      for (int& b : batch) b = rng.sample(cum_inner);
      const VectorXd g_hat = minibatch_inner_estimate(problem, ledger, cache, x, batch);
      const int i_k = rng.sample(cum_outer);
      const int j_k = rng.sample(cum_inner);
      const VectorXd grad = vr_gradient_biased(problem, ledger, cache, x, i_k, j_k, g_hat);

      const VectorXd x_next = solve_x_subproblem(factor, constraint, config.rho, x, lambda,
                                                 w_next, grad, config.eta);
      const VectorXd lambda_next = update_dual(config.rho, lambda, constraint, x_next, w_next);
      if (config.check_invariants)
        result.max_xdual_residual =
            std::max(result.max_xdual_residual,
                     xdual_residual(constraint, x, x_next, lambda_next, grad, config.eta));

      x = x_next;
      w = w_next;
      lambda = lambda_next;
      check_finite_state(x, w, lambda, result.trace);
      sum_x += x;
      sum_w += w;
    }

    x_tilde = sum_x / static_cast<double>(config.K);
    w_tilde = sum_w / static_cast<double>(config.K);

    result.trace.rows.push_back(
        make_row(problem, constraint, reference, s, ledger.paper, x_tilde, w_tilde, t0));
    const auto& row = result.trace.rows.back();
    if (config.stop_tolerance && row.objective_gap && *row.objective_gap <= *config.stop_tolerance)
      break;
  }

  // Final dual reset at the last reference point; charged to the ledger but
  // past the last trace row, matching the amortized per-epoch account.
  result.lambda = dual_reset(at_pinv, full_gradient(problem, ledger, x_tilde));
  result.x = x_tilde;
  result.w = w_tilde;
  return result;
}

RunResult run_algorithm2(const CompositionProblem& problem, const ConstraintSpec& constraint,
                         const SolverConfig& config, const ReferenceSolution* reference) {
  problem.validate();
  constraint.validate();
  config.validate(problem);
  if (config.mode == SolverMode::StronglyConvex)
    throw std::invalid_argument("run_algorithm2 requires a general convex mode");
  const std::optional<double> lf = effective_L_F(problem, config);

  const auto t0 = std::chrono::steady_clock::now();
  const int q = problem.q;
  const int l = constraint.l();

  RunResult result;
  result.trace.algorithm =
      config.mode == SolverMode::ConvexSmooth ? "com-svr-admm-cv" : "com-svr-admm-ns";
  OracleLedger& ledger = result.ledger;

  Rng rng(config.seed);
  const VectorXd cum_inner = cumulative_weights(problem.inner_weights);
  const VectorXd cum_outer = cumulative_weights(problem.outer_weights);

  VectorXd x_tilde = config.x0 ? *config.x0 : VectorXd::Zero(q);
  VectorXd x_hat = x_tilde;
  VectorXd w_hat = config.w0 ? *config.w0 : VectorXd::Zero(l);
  VectorXd lambda_hat = VectorXd::Zero(constraint.p());

  // An arbitrary positive seed; refactored on first use anyway.
  FactoredSpd factor(1.0, config.rho, constraint.A);
  OmegaSubproblem omega_solver(constraint, config.rho);
  const bool smooth_reg = constraint.regularizer.smooth();

  VectorXd bar_x = VectorXd::Zero(q);
  VectorXd bar_w = VectorXd::Zero(l);
  VectorXd bar_z_x = VectorXd::Zero(q);

  for (int s = 1; s <= config.S; ++s) {
    ReferenceCache cache = make_reference_cache(problem, ledger, x_tilde, s - 1);

    VectorXd x = x_hat;
    VectorXd w = w_hat;
    VectorXd lambda = lambda_hat;
    VectorXd sum_x = VectorXd::Zero(q);
    VectorXd sum_w = VectorXd::Zero(l);
    VectorXd sum_lambda = VectorXd::Zero(constraint.p());
    VectorXd sum_x_lower = VectorXd::Zero(q);  // k = 0..K-1 average

    for (int k = 0; k < config.K; ++k) {
      sum_x_lower += x;
      const VectorXd w_next = omega_solver.solve(x, lambda);
      if (config.check_invariants && smooth_reg)
        result.max_omega_residual = std::max(
            result.max_omega_residual, omega_residual(constraint, config.rho, x, lambda, w_next));

      const VectorXd g_exact = mean_inner(problem, ledger, x);
      const int i_k = rng.sample(cum_outer);
      const int j_k = rng.sample(cum_inner);
      const VectorXd grad = vr_gradient_unbiased(problem, ledger, cache, x, i_k, j_k, g_exact);

      const ScheduleValue sched = schedule(config.mode, s, k, config.K, lf);
      const VectorXd x_next = solve_x_subproblem(factor, constraint, config.rho, x, lambda,
                                                 w_next, grad, sched.eta_eff);
      const VectorXd lambda_next = update_dual(config.rho, lambda, constraint, x_next, w_next);
      if (config.check_invariants)
        result.max_xdual_residual =
            std::max(result.max_xdual_residual,
                     xdual_residual(constraint, x, x_next, lambda_next, grad, sched.eta_eff));

      x = x_next;
      w = w_next;
      lambda = lambda_next;
      check_finite_state(x, w, lambda, result.trace);
      sum_x += x;
      sum_w += w;
      sum_lambda += lambda;
    }

    const double kd = static_cast<double>(config.K);
    x_tilde = sum_x / kd;
    const VectorXd w_tilde = sum_w / kd;
    const VectorXd dot_x = sum_x_lower / kd;
    result.lambda_tilde = sum_lambda / kd;
    x_hat = x;
    w_hat = w;
    lambda_hat = lambda;

    const double sd = static_cast<double>(s);
    bar_x = ((sd - 1.0) * bar_x + x_tilde) / sd;
    bar_w = ((sd - 1.0) * bar_w + w_tilde) / sd;
    bar_z_x = ((sd - 1.0) * bar_z_x + dot_x) / sd;

    result.trace.rows.push_back(
        make_row(problem, constraint, reference, s, ledger.paper, bar_x, bar_w, t0));
    const auto& row = result.trace.rows.back();
    if (config.stop_tolerance && row.objective_gap && *row.objective_gap <= *config.stop_tolerance)
      break;
  }

  result.x = bar_x;
  result.w = bar_w;
  result.lambda = lambda_hat;
  result.z_x = bar_z_x;
  return result;
}

}  // namespace csopt
