#pragma once

#include <span>

#include "csopt/problem.hpp"

namespace csopt {

// Epoch snapshot: the reference point with its exact inner value and full
// gradient, refreshed every K inner iterations.
struct ReferenceCache {
  VectorXd x_tilde;
  VectorXd g_tilde;     // g(x_tilde)
  VectorXd grad_tilde;  // grad F(x_tilde)
  int epoch = 0;
};

// Builds the snapshot; costs 2m+n paper queries (m for g, m+n for grad F).
ReferenceCache make_reference_cache(const CompositionProblem& problem, OracleLedger& ledger,
                                    const VectorXd& x_tilde, int epoch);

// Mini-batch inner estimate
//   ghat(x_k) = g(x~) - (1/N) * sum_j [ g_{batch[j]}(x~) - g_{batch[j]}(x_k) ].
// Batch indices are sampled with replacement by the caller; 2N queries.
VectorXd minibatch_inner_estimate(const CompositionProblem& problem, OracleLedger& ledger,
                                  const ReferenceCache& cache, const VectorXd& x_k,
                                  std::span<const int> batch);

// Variance-reduced gradient built from the mini-batch estimate (biased):
//   dg_{j}(x_k)^T grad f_i(ghat) - dg_{j}(x~)^T grad f_i(g(x~)) + grad F(x~).
// 4 queries.
VectorXd vr_gradient_biased(const CompositionProblem& problem, OracleLedger& ledger,
                            const ReferenceCache& cache, const VectorXd& x_k, int i_k, int j_k,
                            const VectorXd& g_hat);

// Same correction built from the exact inner value g(x_k); unbiased. 4 queries.
VectorXd vr_gradient_unbiased(const CompositionProblem& problem, OracleLedger& ledger,
                              const ReferenceCache& cache, const VectorXd& x_k, int i_k, int j_k,
                              const VectorXd& g_exact);

}  // namespace csopt
