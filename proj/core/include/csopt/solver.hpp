#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "csopt/estimators.hpp"
#include "csopt/linalg.hpp"
#include "csopt/problem.hpp"
#include "csopt/trace.hpp"

namespace csopt {

enum class SolverMode { StronglyConvex, ConvexSmooth, ConvexNonsmooth };

struct SolverConfig {
  int K = 10;                 // inner iterations per epoch
  int S = 50;                 // outer epochs (max epochs in strongly convex mode)
  int N = 5;                  // mini-batch size (strongly convex mode)
  double eta = 0.1;           // base stepsize (strongly convex mode)
  double rho = 1.0;           // augmented-Lagrangian penalty
  SolverMode mode = SolverMode::StronglyConvex;
  std::optional<double> L_F;  // required for ConvexSmooth
  std::uint64_t seed = 0;
  std::optional<double> stop_tolerance;  // early stop on objective gap
  std::optional<VectorXd> x0;
  std::optional<VectorXd> w0;
  bool check_invariants = false;  // record subproblem/dual residuals per step

  void validate(const CompositionProblem& problem) const;
};

// Per-iteration stepsize data: the G_k-weighted proximal term collapses to a
// plain quadratic with effective stepsize eta_s / c_k.
struct ScheduleValue {
  double eta_s = 0.0;
  double c_k = 0.0;
  double eta_eff = 0.0;
};

// Stage-s stepsize schedule. Smooth: eta_s = 1/((s+1)L_F), c interpolated
// linearly from 1/s at k=0 down to 1/(s+1) at k=K-1 (and at k=K). Nonsmooth:
// eta_s = 1/(s+1), c from 1/sqrt(s) to 1/sqrt(s+1).
ScheduleValue schedule(SolverMode mode, int s, int k, int K, std::optional<double> L_F);

// Exact minimizer of R(w) + <lambda, Bw> + (rho/2)||A x_k + B w||^2.
// Quadratic regularizers factor the normal matrix once; L1/custom require
// B^T B to be a scalar multiple of I and reduce to a prox step.
class OmegaSubproblem {
 public:
  OmegaSubproblem(const ConstraintSpec& constraint, double rho);
  VectorXd solve(const VectorXd& x_k, const VectorXd& lambda_k) const;

 private:
  const ConstraintSpec& constraint_;
  double rho_;
  Eigen::LLT<MatrixXd> llt_;
  double beta_ = 0.0;
};

VectorXd solve_omega_subproblem(const ConstraintSpec& constraint, double rho, const VectorXd& x_k,
                                const VectorXd& lambda_k);

// Solves ((1/eta_eff) I + rho A^T A) x = x_k/eta_eff - grad - A^T lambda - rho A^T B w_next.
// `factor` is updated in place when (1/eta_eff, rho) changed.
VectorXd solve_x_subproblem(FactoredSpd& factor, const ConstraintSpec& constraint, double rho,
                            const VectorXd& x_k, const VectorXd& lambda_k, const VectorXd& w_next,
                            const VectorXd& grad_est, double eta_eff);
VectorXd solve_x_subproblem(const ConstraintSpec& constraint, double rho, const VectorXd& x_k,
                            const VectorXd& lambda_k, const VectorXd& w_next,
                            const VectorXd& grad_est, double eta_eff);

VectorXd update_dual(double rho, const VectorXd& lambda_k, const ConstraintSpec& constraint,
                     const VectorXd& x_next, const VectorXd& w_next);

// lambda~ = -(A^T)^+ grad F(x~); consistent with the KKT dual at a stationary
// reference point when A has full row rank.
VectorXd dual_reset(const MatrixXd& a_transpose_pinv, const VectorXd& grad_at_reference);

struct GapMetrics {
  double objective_gap = 0.0;
  double feasibility = 0.0;
  double bregman_gap = 0.0;
};

GapMetrics gap_metrics(const CompositionProblem& problem, const ConstraintSpec& constraint,
                       const ReferenceSolution& reference, const VectorXd& x, const VectorXd& w);

struct RunResult {
  Trace trace;
  VectorXd x;       // output primal point (epoch average / running average)
  VectorXd w;
  VectorXd lambda;  // last dual iterate
  OracleLedger ledger;
  // Algorithm 2 only: average built from the k=0..K-1 inner means, and the
  // per-epoch dual average (logged; the carryover dual drives iteration).
  std::optional<VectorXd> z_x;
  std::optional<VectorXd> lambda_tilde;
  // Populated when check_invariants is set.
  double max_omega_residual = 0.0;
  double max_xdual_residual = 0.0;
};

// Raised when iterates blow up; carries the partial trace.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string what, Trace partial)
      : std::runtime_error(std::move(what)), partial_trace(std::move(partial)) {}
  Trace partial_trace;
};

// Strongly convex variant: mini-batch inner estimates, biased VR gradient,
// constant stepsize, dual reset through the pseudoinverse each epoch.
RunResult run_algorithm1(const CompositionProblem& problem, const ConstraintSpec& constraint,
                         const SolverConfig& config, const ReferenceSolution* reference = nullptr);

// General convex variant: exact inner means, unbiased VR gradient, decaying
// G_k-weighted stepsizes, carryover of (x, w, lambda, G) across epochs.
RunResult run_algorithm2(const CompositionProblem& problem, const ConstraintSpec& constraint,
                         const SolverConfig& config, const ReferenceSolution* reference = nullptr);

}  // namespace csopt
