#pragma once

#include <cstdint>
#include <optional>

#include "csopt/problem.hpp"

namespace csopt {

struct GeneratedProblem {
  CompositionProblem problem;
  ConstraintSpec constraint;
  std::optional<ReferenceSolution> optimum;  // analytic, when available
};

// Mean-variance portfolio instance: inner maps stack x with the per-slot
// return, outer terms score one observed slot against the mean return.
struct PortfolioSpec {
  int assets = 20;        // number of assets (dimension of x)
  int slots = 200;        // number of observed time slots (m = n)
  double cov = 2.0;       // reward covariance scale
  double mu_ridge = 0.01; // ridge weight on the split variable
  std::uint64_t seed = 0;
};

GeneratedProblem make_portfolio(const PortfolioSpec& spec);

// Same construction with the reward matrix (slots x assets) injected.
GeneratedProblem make_portfolio_from_rewards(const MatrixXd& rewards, double mu_ridge);

// On-policy evaluation of a linear value function by Bellman-residual
// minimization. Transitions use one mixing distribution shared by all
// states so the inner expectation matches the single-distribution
// composition form exactly.
struct PolicyEvalSpec {
  int states = 200;
  int feature_dim = 100;
  double discount = 0.9;
  double mu_ridge = 0.01;
  std::uint64_t seed = 0;
};

GeneratedProblem make_policy_eval(const PolicyEvalSpec& spec);

// Explicit-data variant: features is states x feature_dim (rows phi_s),
// mixing the shared next-state distribution, rewards(s, s') the transition
// rewards.
GeneratedProblem make_policy_eval_explicit(const MatrixXd& features, const VectorXd& mixing,
                                           const MatrixXd& rewards, double discount,
                                           double mu_ridge);

// Quadratic F(x) = 0.5 x^T Q x + b^T x expressed compositionally (4 scaled
// affine inner maps, 4 scaled quadratic outer terms) with a random
// full-row-rank constraint block and a stored analytic optimum.
struct SyntheticQuadraticSpec {
  int dim = 20;
  int constraints = 5;
  double condition = 10.0;
  double mu_ridge = 0.1;
  int rank = -1;  // -1: full rank (strongly convex); otherwise rank(Q)
  std::uint64_t seed = 0;
};

GeneratedProblem make_synthetic_quadratic(const SyntheticQuadraticSpec& spec);

}  // namespace csopt
