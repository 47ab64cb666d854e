#include "csopt/estimators.hpp"

#include <stdexcept>

namespace csopt {

ReferenceCache make_reference_cache(const CompositionProblem& problem, OracleLedger& ledger,
                                    const VectorXd& x_tilde, int epoch) {
  ReferenceCache cache;
  cache.x_tilde = x_tilde;
  cache.g_tilde = mean_inner(problem, ledger, x_tilde);
  cache.grad_tilde = full_gradient(problem, ledger, x_tilde);
  cache.epoch = epoch;
  return cache;
}

VectorXd minibatch_inner_estimate(const CompositionProblem& problem, OracleLedger& ledger,
                                  const ReferenceCache& cache, const VectorXd& x_k,
                                  std::span<const int> batch) {
  if (batch.empty()) throw std::invalid_argument("mini-batch must be nonempty");
  VectorXd correction = VectorXd::Zero(problem.r);
  for (int j : batch) {
    if (j < 0 || j >= problem.m) throw std::out_of_range("mini-batch index out of range");
    correction += problem.inner_value(j, cache.x_tilde) - problem.inner_value(j, x_k);
  }
  const auto count = static_cast<long long>(batch.size());
  ledger.inner_value += 2 * count;
  ledger.paper += 2 * count;
  return cache.g_tilde - correction / static_cast<double>(batch.size());
}

namespace {

VectorXd vr_gradient(const CompositionProblem& problem, OracleLedger& ledger,
                     const ReferenceCache& cache, const VectorXd& x_k, int i_k, int j_k,
                     const VectorXd& inner_at_xk) {
  if (i_k < 0 || i_k >= problem.n) throw std::out_of_range("outer index out of range");
  if (j_k < 0 || j_k >= problem.m) throw std::out_of_range("inner index out of range");
  if (inner_at_xk.size() != problem.r)
    throw std::invalid_argument("inner estimate dimension mismatch");

  MatrixXd jac_k = problem.inner_jacobian(j_k, x_k);
  MatrixXd jac_tilde = problem.inner_jacobian(j_k, cache.x_tilde);
  VectorXd f_grad_k = problem.outer_gradient(i_k, inner_at_xk);
  VectorXd f_grad_tilde = problem.outer_gradient(i_k, cache.g_tilde);

  ledger.inner_jacobian += 2;
  ledger.outer_gradient += 2;
  ledger.paper += 4;

  return jac_k.transpose() * f_grad_k - jac_tilde.transpose() * f_grad_tilde + cache.grad_tilde;
}

}  // namespace

VectorXd vr_gradient_biased(const CompositionProblem& problem, OracleLedger& ledger,
                            const ReferenceCache& cache, const VectorXd& x_k, int i_k, int j_k,
                            const VectorXd& g_hat) {
  return vr_gradient(problem, ledger, cache, x_k, i_k, j_k, g_hat);
}

VectorXd vr_gradient_unbiased(const CompositionProblem& problem, OracleLedger& ledger,
                              const ReferenceCache& cache, const VectorXd& x_k, int i_k, int j_k,
                              const VectorXd& g_exact) {
  return vr_gradient(problem, ledger, cache, x_k, i_k, j_k, g_exact);
}

}  // namespace csopt
